"""Replicate-scale record builders.

Two fast paths feed the experiments:

- REM landscape: the whole record is a handful of array passes (packed
  walk positions, one normal per distinct site in first-visit order,
  vectorized log-domain accumulation).  First-visit ordering makes every
  stream prefix-stable, so an undershot horizon can be doubled and rebuilt
  from the same seeds without changing the prefix already computed.

- Exact pair disorder (p = 2): replicates advance in lock step, with the
  per-flip energy update vectorized across the batch.  The symmetrized
  coupling matrix makes the update a single row gather per step.

Both paths take seed material rather than live generators so a rebuild or
rerun starts every stream from the same point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import ClockRecord, build_clock_record
from .scales import DerivedScales
from .walk import SpinConfig, Trajectory, srw_trajectory

__all__ = [
    "first_visit_energies",
    "rem_clock_record",
    "rem_record_until",
    "SKLockstep",
    "CrossingBatch",
]

_BLOCK = 2048


def _generator(seed: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def first_visit_energies(
    packed: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """One standard normal per distinct row, drawn in first-visit order.

    Rows are packed spin words; revisits reuse the site's value.  Because
    draws follow first visits, extending the position list only appends
    draws, leaving earlier values untouched.
    """
    packed = np.ascontiguousarray(packed)
    if packed.ndim != 2:
        raise ValueError("packed positions must be 2-d")
    view = packed.view([("", packed.dtype)] * packed.shape[1]).ravel()
    _, first_idx, inverse = np.unique(view, return_index=True, return_inverse=True)
    order = np.argsort(first_idx, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    draws = rng.standard_normal(order.size)
    return draws[rank[inverse]]


def rem_clock_record(
    scales: DerivedScales, seed_set: dict, steps: int
) -> tuple[ClockRecord, Trajectory]:
    """One REM replicate: walk, site energies, holds, log-domain record."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    traj = srw_trajectory(scales.N, steps, _generator(seed_set["walk"]))
    packed = traj.positions_packed()[:steps]
    energies = first_visit_energies(packed, _generator(seed_set["disorder"]))
    holds = _generator(seed_set["holds"]).exponential(size=steps)
    record = build_clock_record(energies, holds, scales.beta, scales.N)
    return record, traj


def rem_record_until(
    scales: DerivedScales,
    seed_set: dict,
    log_target: float,
    initial_steps: int,
    max_doublings: int = 10,
) -> tuple[ClockRecord, Trajectory, bool]:
    """Rebuild with doubled horizon until the clock passes the target.

    Prefix stability of the streams guarantees each rebuild extends the
    previous record.  Returns the truncation flag instead of raising when
    the cap is hit; downstream inversion flags the replicate anyway.
    """
    steps = max(int(initial_steps), 16)
    for _ in range(max_doublings + 1):
        record, traj = rem_clock_record(scales, seed_set, steps)
        if record.log_S[-1] > log_target:
            return record, traj, False
        steps *= 2
    return record, traj, True


@dataclass
class CrossingBatch:
    """Per-replicate clock crossings of a fixed set of log levels.

    k[b, j] is the smallest step count whose partial clock exceeds level j
    (0 while uncrossed); positions[b, j] is the packed walker position at
    that moment, i.e. position k - 1.
    """

    levels: np.ndarray
    k: np.ndarray
    positions: np.ndarray
    truncated: np.ndarray
    steps_done: int

    def distance(self, b: int, j1: int, j2: int) -> int:
        """Hamming distance between the crossing positions of two levels."""
        diff = self.positions[b, j1] ^ self.positions[b, j2]
        return int(np.bitwise_count(diff).sum())


class SKLockstep:
    """Batched exact-disorder runner for pair interactions (p = 2).

    All replicates advance one walk step per iteration; the energy change
    of a single-coordinate flip is computed from the cached interaction
    field, so the per-step cost is one row of the symmetrized coupling
    matrix per replicate.
    """

    def __init__(self, scales: DerivedScales, seed_sets: list[dict]):
        if scales.p != 2:
            raise ValueError("lock-step engine only supports p = 2")
        self.scales = scales
        N = scales.N
        B = len(seed_sets)
        if B < 1:
            raise ValueError("need at least one replicate")
        self.B = B
        self.N = N
        self.sym = np.empty((B, N, N))
        for b, seeds in enumerate(seed_sets):
            coup = _generator(seeds["disorder"]).standard_normal(N * N)
            J = coup.reshape(N, N)
            self.sym[b] = J + J.T
        self.spins = np.ones((B, N))
        self.field = self.sym.sum(axis=2)
        self.unnorm = self.sym.sum(axis=(1, 2)) / 2.0
        words = (N + 63) // 64
        self.packed = np.zeros((B, words), dtype=np.uint64)
        self._walk_rngs = [_generator(s["walk"]) for s in seed_sets]
        self._holds_rngs = [_generator(s["holds"]) for s in seed_sets]
        self._rows = np.arange(B)

    def _energies(self) -> np.ndarray:
        return self.unnorm / self.N

    def _flip(self, k: np.ndarray) -> None:
        rows = self._rows
        sigma_k = self.spins[rows, k]
        gathered = self.sym[rows, k, :]
        delta = -2.0 * sigma_k * (self.field[rows, k] - gathered[rows, k] * sigma_k)
        self.unnorm += delta
        self.field -= (2.0 * sigma_k)[:, None] * gathered
        self.spins[rows, k] = -sigma_k
        word = (k // 64).astype(np.int64)
        bit = np.uint64(1) << (k % 64).astype(np.uint64)
        self.packed[rows, word] ^= bit

    def _draw_block(self, blk: int) -> tuple[np.ndarray, np.ndarray]:
        flips = np.empty((self.B, blk), dtype=np.int64)
        holds = np.empty((self.B, blk))
        for b in range(self.B):
            flips[b] = self._walk_rngs[b].integers(0, self.N, size=blk)
            holds[b] = self._holds_rngs[b].exponential(size=blk)
        return flips, holds

    def run_fixed(self, steps: int) -> list[ClockRecord]:
        """Advance every replicate a fixed number of steps; full records."""
        if steps < 1:
            raise ValueError("steps must be >= 1")
        energies = np.empty((self.B, steps))
        holds = np.empty((self.B, steps))
        done = 0
        while done < steps:
            blk = min(_BLOCK, steps - done)
            flips, block_holds = self._draw_block(blk)
            holds[:, done : done + blk] = block_holds
            for j in range(blk):
                energies[:, done + j] = self._energies()
                if done + j < steps - 1:
                    self._flip(flips[:, j])
            done += blk
        return [
            build_clock_record(
                energies[b], holds[b], self.scales.beta, self.scales.N
            )
            for b in range(self.B)
        ]

    def run_until(self, log_levels, step_cap: int) -> CrossingBatch:
        """Step until every replicate's clock exceeds every level.

        Records the step index and walker position at each first crossing;
        replicates still short of a level at the cap stay marked truncated.
        """
        levels = np.asarray(log_levels, dtype=float)
        if levels.ndim != 1 or levels.size == 0:
            raise ValueError("log_levels must be a nonempty 1-d array")
        n_thr = levels.size
        scale = self.scales.beta * math.sqrt(self.N)
        log_S = np.full(self.B, -np.inf)
        k_idx = np.zeros((self.B, n_thr), dtype=np.int64)
        positions = np.zeros((self.B, n_thr, self.packed.shape[1]), dtype=np.uint64)
        crossed = np.zeros((self.B, n_thr), dtype=bool)
        steps = 0
        while steps < step_cap and not crossed.all():
            blk = min(_BLOCK, step_cap - steps)
            flips, block_holds = self._draw_block(blk)
            log_holds = np.log(block_holds)
            for j in range(blk):
                log_S = np.logaddexp(log_S, log_holds[:, j] + scale * self._energies())
                newly = (log_S[:, None] > levels[None, :]) & ~crossed
                if newly.any():
                    rows, cols = np.nonzero(newly)
                    k_idx[rows, cols] = steps + j + 1
                    positions[rows, cols] = self.packed[rows]
                    crossed[rows, cols] = True
                self._flip(flips[:, j])
            steps += blk
        return CrossingBatch(
            levels=levels,
            k=k_idx,
            positions=positions,
            truncated=~crossed,
            steps_done=steps,
        )

    def check_against_direct(self, tol: float = 1e-8) -> float:
        """Max deviation of the cached energies from a direct contraction."""
        worst = 0.0
        for b in range(self.B):
            direct = self.spins[b] @ (self.sym[b] / 2.0) @ self.spins[b]
            worst = max(worst, abs(direct - self.unnorm[b]))
        if worst > tol * self.N:
            raise AssertionError(f"cached energy drifted by {worst}")
        return worst
