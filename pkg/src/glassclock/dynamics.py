"""Hopping dynamics on the energy landscape: clock and maximal processes.

The walker leaves site sigma at rate exp(-beta sqrt(N) H(sigma)) / N per
neighbour, so along the jump chain it holds for e_i * exp(beta sqrt(N) X(i))
at step i, with e_i i.i.d. mean-one exponentials.  The clock process S(k) is
the total time elapsed after k jumps and m(k) is the largest single hold
term seen so far.  Both are kept in log-domain: a single deep site easily
exceeds exp(alpha * N) and overflows float64.

Rescaled, alpha-powered paths t -> (S(t * r) / t_N)^alpha live on the grid
t_i = i / r and converge to an extremal record process; this module builds
those paths, inverts the clock (first-passage form), and evaluates the
two-time aging event "few spins flipped between the observation times".
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, NamedTuple, Protocol, Sequence

import numpy as np

from .scales import DerivedScales, power_normalize
from .walk import Trajectory
from . import hamiltonian as ham

__all__ = [
    "ClockRecord",
    "SteppedPath",
    "ClockInverse",
    "run_rht",
    "rescaled_path",
    "coarse_grain",
    "clock_inverse",
    "aging_indicator",
    "sup_power_distance",
    "default_horizon",
    "ArrayEnergySource",
    "DisorderTrajectorySource",
    "ConditionalTrajectorySource",
    "RemTrajectorySource",
]


class EnergySource(Protocol):
    def sequence(self, n: int) -> np.ndarray:
        """First n landscape values along the walk (prefix-stable)."""


class ArrayEnergySource:
    """Wraps a precomputed energy array (mainly for injection in tests)."""

    def __init__(self, values) -> None:
        self.values = np.asarray(values, dtype=float)

    def sequence(self, n: int) -> np.ndarray:
        if n > len(self.values):
            raise ValueError(f"only {len(self.values)} energies available, need {n}")
        return self.values[:n]


class DisorderTrajectorySource:
    """Exact-disorder energies along a trajectory via incremental flips."""

    def __init__(self, tensor: ham.CouplingTensor, traj: Trajectory) -> None:
        if tensor.N != traj.N:
            raise ValueError("tensor and trajectory dimensions differ")
        self.tensor = tensor
        self.traj = traj
        self._state = ham.EnergyState.from_config(tensor, traj.start)
        self._values = [self._state.energy]

    def sequence(self, n: int) -> np.ndarray:
        if n > self.traj.length + 1:
            raise ValueError("trajectory too short for requested energy count")
        while len(self._values) < n:
            k = int(self.traj.flips[len(self._values) - 1])
            ham.flip_update(self._state, self.tensor, k)
            self._values.append(self._state.energy)
        return np.array(self._values[:n])


class ConditionalTrajectorySource:
    """Windowed conditional-Gaussian energies along a trajectory.

    The whole sequence is sampled at construction (sequential conditioning
    cannot be extended after the fact without replaying the stream).
    """

    def __init__(
        self, traj: Trajectory, p: int, window: int, rng: np.random.Generator
    ) -> None:
        self.values = ham.conditional_energy_sequence(traj, traj.N, p, window, rng)

    def sequence(self, n: int) -> np.ndarray:
        if n > len(self.values):
            raise ValueError("trajectory too short for requested energy count")
        return self.values[:n]


class RemTrajectorySource:
    """Independent value per distinct visited site, reused on revisits."""

    def __init__(self, traj: Trajectory, rng: np.random.Generator) -> None:
        self.traj = traj
        self.rng = rng
        self._sites: dict[bytes, float] = {}
        self._values: np.ndarray | None = None

    def sequence(self, n: int) -> np.ndarray:
        if n > self.traj.length + 1:
            raise ValueError("trajectory too short for requested energy count")
        if self._values is None or len(self._values) < n:
            self._values = ham.rem_energy_sequence(
                self.traj, self.rng, site_values=self._sites
            )
        return self._values[:n]


@dataclass
class ClockRecord:
    """Energies, holds, and the log-domain clock/maximal accumulations.

    log_S has length k+1 with log_S[0] = -inf (S(0) = 0); log_S[k] is the
    log of the sum of the first k hold terms.  log_m mirrors it for the
    running maximum of beta sqrt(N) X(i) (hold factors excluded, matching
    the mean-holding-time record).
    """

    energies: np.ndarray
    holds: np.ndarray
    log_terms: np.ndarray
    log_S: np.ndarray
    log_m: np.ndarray

    @property
    def length(self) -> int:
        return len(self.energies)

    def csv_rows(self):
        """Summary rows (k, X0(k), log_S(k), log_m(k)) for k < length."""
        for k in range(self.length):
            yield k, float(self.energies[k]), float(self.log_S[k]), float(
                self.log_m[k]
            )


def build_clock_record(
    energies: np.ndarray, holds: np.ndarray, beta: float, N: int
) -> ClockRecord:
    """Assemble log-domain clock arrays from raw energies and holds."""
    energies = np.asarray(energies, dtype=float)
    holds = np.asarray(holds, dtype=float)
    if energies.shape != holds.shape:
        raise ValueError("energies and holds must have equal length")
    scaled = beta * math.sqrt(N) * energies
    log_terms = np.log(holds) + scaled
    neg_inf = np.array([-np.inf])
    log_S = np.concatenate([neg_inf, np.logaddexp.accumulate(log_terms)])
    log_m = np.concatenate([neg_inf, np.maximum.accumulate(scaled)])
    return ClockRecord(
        energies=energies, holds=holds, log_terms=log_terms, log_S=log_S, log_m=log_m
    )


def run_rht(
    scales: DerivedScales,
    energy_source: EnergySource | Sequence[float] | np.ndarray,
    steps: int,
    rng: np.random.Generator,
    holds: np.ndarray | None = None,
) -> ClockRecord:
    """Simulate `steps` jumps of the hopping dynamics.

    The walk itself lives inside `energy_source` (which yields landscape
    values along it); this function adds the exponential holds from its own
    stream so walk and holds can be varied independently.  Pass `holds` to
    inject deterministic values in tests.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if hasattr(energy_source, "sequence"):
        energies = energy_source.sequence(steps)
    else:
        energies = np.asarray(energy_source, dtype=float)
        if len(energies) < steps:
            raise ValueError("energy array shorter than requested steps")
        energies = energies[:steps]
    if holds is None:
        holds = rng.exponential(size=steps)
    else:
        holds = np.asarray(holds, dtype=float)
        if len(holds) != steps:
            raise ValueError("injected holds must match steps")
    return build_clock_record(energies, holds, scales.beta, scales.N)


@dataclass(frozen=True)
class SteppedPath:
    """Right-continuous step function: value at t is values[last time <= t]."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        if len(self.times) != len(self.values):
            raise ValueError("times and values must have equal length")
        if len(self.times) and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    def value_at(self, t: float) -> float:
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        if idx < 0:
            raise ValueError(f"time {t} precedes the path start {self.times[0]}")
        return float(self.values[idx])


def _require_length(record: ClockRecord, scales: DerivedScales, T: float) -> int:
    n = math.ceil(T * scales.r)
    if record.length < n:
        raise ValueError(
            f"record too short: covering T={T} at r={scales.r:.6g} needs "
            f"{n} steps, record has {record.length}"
        )
    return n


def rescaled_path(
    record: ClockRecord,
    scales: DerivedScales,
    which: Literal["clock", "maximal"],
    T: float,
) -> SteppedPath:
    """Alpha-powered rescaled path on the grid t_i = i / r, i = 0..ceil(T r)."""
    n = _require_length(record, scales, T)
    if which == "clock":
        logs = record.log_S
    elif which == "maximal":
        logs = record.log_m
    else:
        raise ValueError(f"unknown path kind {which!r}")
    times = np.arange(n + 1) / scales.r
    values = power_normalize(logs[: n + 1] - scales.log_t, scales.alpha)
    return SteppedPath(times=times, values=values)


def coarse_grain(record: ClockRecord, nu: int) -> ClockRecord:
    """Clock record with log_S and log_m frozen between multiples of nu.

    Index i reads the value at nu * floor(i / nu), so the coarse record is
    the block-aligned view of the original; nu = 1 returns an equal record.
    """
    if nu < 1:
        raise ValueError("nu must be >= 1")
    idx = np.arange(len(record.log_S))
    src = nu * (idx // nu)
    src = np.minimum(src, len(record.log_S) - 1)
    return ClockRecord(
        energies=record.energies,
        holds=record.holds,
        log_terms=record.log_terms,
        log_S=record.log_S[src],
        log_m=record.log_m[src],
    )


class ClockInverse(NamedTuple):
    k: int
    truncated: bool


def clock_inverse(record: ClockRecord, log_target: float) -> ClockInverse:
    """Smallest k with log_S(k) > log_target (right-continuous inverse).

    If the simulated clock never passes the target the record length is
    returned with the truncation flag set.
    """
    idx = int(np.searchsorted(record.log_S, log_target, side="right"))
    if idx >= len(record.log_S):
        return ClockInverse(k=record.length, truncated=True)
    return ClockInverse(k=idx, truncated=False)


def aging_indicator(
    record: ClockRecord,
    traj: Trajectory,
    scales: DerivedScales,
    theta: float,
    epsilon: float,
) -> tuple[bool, bool]:
    """Whether at most N*epsilon/2 spins separate the two observation times.

    The observation times are t and t * (1+theta)^(1/alpha), handled in
    log-domain; the position at a time is the one at the last completed
    jump.  Returns (indicator, truncated).
    """
    if theta < 0:
        raise ValueError("theta must be >= 0")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    log_t1 = scales.log_t
    log_t2 = scales.log_t + math.log1p(theta) / scales.alpha
    k1, tr1 = clock_inverse(record, log_t1)
    k2, tr2 = clock_inverse(record, log_t2)
    dist = traj.distance(max(k1 - 1, 0), max(k2 - 1, 0))
    return dist <= scales.N * epsilon / 2.0, tr1 or tr2


def sup_power_distance(record: ClockRecord, scales: DerivedScales, T: float) -> float:
    """Exact sup over the jump grid of |clock^alpha - maximal^alpha| rescaled."""
    n = _require_length(record, scales, T)
    vs = power_normalize(record.log_S[: n + 1] - scales.log_t, scales.alpha)
    vm = power_normalize(record.log_m[: n + 1] - scales.log_t, scales.alpha)
    return float(np.max(np.abs(vs - vm)))


def default_horizon(
    scales: DerivedScales, T: float = 0.0, theta: float | None = None
) -> int:
    """Step cap: 20 r times the larger of T and the level-crossing estimate.

    The powered clock crosses level 1+theta after a rescaled time of order
    (1+theta)^(1/beta^2) / K, so simulating 20 times that leaves the
    truncated fraction negligible at desk scale.
    """
    target = T
    if theta is not None:
        target = max(
            target, (1.0 + theta) ** (1.0 / scales.beta**2) / scales.K
        )
    if target <= 0:
        raise ValueError("horizon needs a positive T or a theta")
    return max(1, math.ceil(20.0 * scales.r * target))
