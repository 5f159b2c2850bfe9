"""Simple random walk on the N-dimensional hypercube, bit-packed.

Spin configurations live in {-1,+1}^N but are stored as packed bits
(bit 1 means spin -1) in little-endian uint64 words, so XOR is a flip and
popcount of XOR is Hamming distance.  A trajectory is a start configuration
plus the sequence of flipped coordinate indices; positions are reconstructed
on demand, with sqrt-spaced checkpoints so random access stays cheap without
materialising every position.

The Hamming distance from the start after k uniform single-coordinate flips
is a birth-death chain on {0..N} (down with probability d/N, up otherwise);
`bd_distribution` iterates that chain exactly and `stationary_log_weight`
gives its binomial invariant mass.  Both serve as oracles for the walk.
"""

from __future__ import annotations

import math
from typing import Literal

import numpy as np

__all__ = [
    "SpinConfig",
    "Trajectory",
    "srw_trajectory",
    "bd_step_distribution",
    "bd_distribution",
    "stationary_log_weight",
    "pair_distance_counts",
    "pair_distance_histogram",
]

_WORD_BITS = 64


def _n_words(N: int) -> int:
    return (N + _WORD_BITS - 1) // _WORD_BITS


def popcount_rows(words: np.ndarray) -> np.ndarray:
    """Total set bits per row of a (..., W) uint64 array."""
    return np.bitwise_count(words).sum(axis=-1, dtype=np.int64)


def toggle_rows(flips: np.ndarray, N: int) -> np.ndarray:
    """One-hot uint64 bit masks, row i flipping coordinate flips[i]."""
    flips = np.asarray(flips, dtype=np.int64)
    if flips.size and (flips.min() < 0 or flips.max() >= N):
        raise ValueError("flip index out of range")
    rows = np.zeros((len(flips), _n_words(N)), dtype=np.uint64)
    if len(flips):
        rows[np.arange(len(flips)), flips // _WORD_BITS] = np.uint64(1) << (
            flips % _WORD_BITS
        ).astype(np.uint64)
    return rows


class SpinConfig:
    """Immutable point of {-1,+1}^N, stored as packed bits (bit 1 = spin -1)."""

    __slots__ = ("N", "words")

    def __init__(self, N: int, words: np.ndarray):
        if N < 1:
            raise ValueError("N must be >= 1")
        words = np.asarray(words, dtype=np.uint64)
        if words.shape != (_n_words(N),):
            raise ValueError("word array has wrong shape")
        # mask stray bits above N so equality and popcount are well defined
        tail = N % _WORD_BITS
        if tail:
            words = words.copy()
            words[-1] &= (np.uint64(1) << np.uint64(tail)) - np.uint64(1)
        self.N = N
        self.words = words
        self.words.setflags(write=False)

    @classmethod
    def all_plus(cls, N: int) -> "SpinConfig":
        return cls(N, np.zeros(_n_words(N), dtype=np.uint64))

    @classmethod
    def random(cls, N: int, rng: np.random.Generator) -> "SpinConfig":
        raw = rng.integers(0, 2**64, size=_n_words(N), dtype=np.uint64)
        return cls(N, raw)

    @classmethod
    def from_spins(cls, spins) -> "SpinConfig":
        spins = np.asarray(spins)
        if not np.isin(spins, (-1, 1)).all():
            raise ValueError("spins must be +-1")
        N = len(spins)
        bits = (spins < 0).astype(np.uint8)
        padded = np.zeros(_n_words(N) * _WORD_BITS, dtype=np.uint8)
        padded[:N] = bits
        words = np.packbits(padded, bitorder="little").view(np.uint64)
        return cls(N, words)

    def spins(self) -> np.ndarray:
        """Configuration as an int8 array of +-1."""
        bits = np.unpackbits(self.words.view(np.uint8), bitorder="little")[: self.N]
        return (1 - 2 * bits.astype(np.int8)).astype(np.int8)

    def flip(self, k: int) -> "SpinConfig":
        if not 0 <= k < self.N:
            raise ValueError(f"coordinate {k} out of range for N={self.N}")
        words = self.words.copy()
        words[k // _WORD_BITS] ^= np.uint64(1) << np.uint64(k % _WORD_BITS)
        return SpinConfig(self.N, words)

    def hamming(self, other: "SpinConfig") -> int:
        if other.N != self.N:
            raise ValueError("dimension mismatch")
        return int(popcount_rows(self.words ^ other.words))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SpinConfig)
            and other.N == self.N
            and bool(np.array_equal(other.words, self.words))
        )

    def __hash__(self) -> int:
        return hash((self.N, self.words.tobytes()))

    def __repr__(self) -> str:
        return f"SpinConfig(N={self.N}, words={self.words.tolist()})"


_TRAJ_MAGIC = b"GCT1"


class Trajectory:
    """A walk: start configuration plus flipped-coordinate indices.

    position(i) is the configuration after i steps, 0 <= i <= length.
    Random access replays from sqrt-spaced checkpoints built lazily on
    first use.
    """

    def __init__(self, start: SpinConfig, flips) -> None:
        self.start = start
        self.flips = np.asarray(flips, dtype=np.int64)
        if self.flips.ndim != 1:
            raise ValueError("flips must be one-dimensional")
        if self.flips.size and (
            self.flips.min() < 0 or self.flips.max() >= start.N
        ):
            raise ValueError("flip index out of range")
        self._checkpoints: np.ndarray | None = None
        self._stride = 0

    @property
    def N(self) -> int:
        return self.start.N

    @property
    def length(self) -> int:
        return int(len(self.flips))

    def _ensure_checkpoints(self) -> None:
        if self._checkpoints is not None:
            return
        stride = max(1, int(math.isqrt(self.length + 1)))
        toggles = toggle_rows(self.flips, self.N)
        marks = [self.start.words]
        pos = self.start.words.copy()
        for j in range(0, self.length, stride):
            chunk = toggles[j : j + stride]
            pos = pos ^ np.bitwise_xor.reduce(chunk, axis=0)
            marks.append(pos.copy())
        self._checkpoints = np.stack(marks)
        self._stride = stride

    def position_words(self, i: int) -> np.ndarray:
        if not 0 <= i <= self.length:
            raise IndexError(f"step index {i} out of range 0..{self.length}")
        self._ensure_checkpoints()
        j = i // self._stride
        words = self._checkpoints[j].copy()
        lo = j * self._stride
        if i > lo:
            toggles = toggle_rows(self.flips[lo:i], self.N)
            words ^= np.bitwise_xor.reduce(toggles, axis=0)
        return words

    def position(self, i: int) -> SpinConfig:
        return SpinConfig(self.N, self.position_words(i))

    def positions_packed(self) -> np.ndarray:
        """All positions as a (length+1, W) uint64 matrix."""
        toggles = toggle_rows(self.flips, self.N)
        out = np.empty((self.length + 1, toggles.shape[1]), dtype=np.uint64)
        out[0] = self.start.words
        if self.length:
            np.bitwise_xor.accumulate(toggles, axis=0, out=toggles)
            out[1:] = toggles ^ self.start.words
        return out

    def distance(self, i: int, j: int) -> int:
        """Hamming distance between position(i) and position(j).

        Computed from flip parities between the two steps, O(|j-i| + N).
        """
        if i > j:
            i, j = j, i
        if not 0 <= i <= j <= self.length:
            raise IndexError("step index out of range")
        counts = np.bincount(self.flips[i:j], minlength=self.N)
        return int((counts % 2).sum())

    def to_bytes(self) -> bytes:
        """Little-endian binary record: magic, N, length, start bits, flips."""
        header = _TRAJ_MAGIC + np.array(
            [self.N, self.length], dtype="<u4"
        ).tobytes()
        start_bits = self.start.words.astype("<u8").tobytes()[
            : (self.N + 7) // 8
        ]
        return header + start_bits + self.flips.astype("<u4").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Trajectory":
        if blob[:4] != _TRAJ_MAGIC:
            raise ValueError("bad trajectory header")
        N, length = np.frombuffer(blob, dtype="<u4", count=2, offset=4)
        N, length = int(N), int(length)
        n_start = (N + 7) // 8
        off = 12
        raw = np.zeros(_n_words(N) * 8, dtype=np.uint8)
        raw[:n_start] = np.frombuffer(blob, dtype=np.uint8, count=n_start, offset=off)
        start = SpinConfig(N, raw.view("<u8").astype(np.uint64))
        off += n_start
        flips = np.frombuffer(blob, dtype="<u4", count=length, offset=off).astype(
            np.int64
        )
        return cls(start, flips)


def srw_trajectory(
    N: int,
    steps: int,
    rng: np.random.Generator,
    start: SpinConfig | None = None,
) -> Trajectory:
    """Uniform single-coordinate-flip walk of the given number of steps."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if start is None:
        start = SpinConfig.all_plus(N)
    if start.N != N:
        raise ValueError("start configuration has wrong dimension")
    flips = rng.integers(0, N, size=steps, dtype=np.int64)
    return Trajectory(start, flips)


def bd_step_distribution(N: int, d: int) -> tuple[float, float]:
    """One-step (down, up) probabilities of the distance chain at distance d."""
    if not 0 <= d <= N:
        raise ValueError(f"distance {d} out of range 0..{N}")
    down = d / N
    return down, 1.0 - down


def bd_distribution(N: int, k: int, d0: int = 0) -> np.ndarray:
    """Exact distribution over {0..N} of the distance chain after k steps."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if not 0 <= d0 <= N:
        raise ValueError("d0 out of range")
    v = np.zeros(N + 1)
    v[d0] = 1.0
    d = np.arange(N + 1, dtype=float)
    up = 1.0 - d / N  # chance to move d -> d+1
    down = d / N  # chance to move d -> d-1
    for _ in range(k):
        nxt = np.zeros_like(v)
        nxt[1:] += v[:-1] * up[:-1]
        nxt[:-1] += v[1:] * down[1:]
        v = nxt
    return v


def stationary_log_weight(N: int, d: int) -> float:
    """log of the binomial invariant mass C(N, d) / 2^N of the distance chain."""
    if not 0 <= d <= N:
        raise ValueError("d out of range")
    return (
        math.lgamma(N + 1)
        - math.lgamma(d + 1)
        - math.lgamma(N - d + 1)
        - N * math.log(2.0)
    )


def pair_distance_histogram(
    traj: Trajectory, nu: int, max_pairs_block: int = 4_000_000
) -> tuple[np.ndarray, np.ndarray]:
    """Counts of ordered position pairs i < j at each Hamming distance.

    Returns (same_block, cross_block) histograms over d = 0..N, where the
    block of step i is i // nu.  Runs in O(L^2) popcounts, blocked to bound
    memory.
    """
    if nu < 1:
        raise ValueError("nu must be >= 1")
    N = traj.N
    pos = traj.positions_packed()
    L = pos.shape[0]
    blocks = np.arange(L) // nu
    same = np.zeros(N + 1, dtype=np.int64)
    cross = np.zeros(N + 1, dtype=np.int64)
    rows_per_chunk = max(1, max_pairs_block // max(1, L))
    j_idx = np.arange(L)
    for lo in range(0, L, rows_per_chunk):
        hi = min(L, lo + rows_per_chunk)
        d = popcount_rows(pos[lo:hi, None, :] ^ pos[None, :, :])
        i_idx = np.arange(lo, hi)
        upper = j_idx[None, :] > i_idx[:, None]
        same_mask = upper & (blocks[None, :] == blocks[i_idx][:, None])
        same += np.bincount(d[same_mask], minlength=N + 1)
        cross += np.bincount(d[upper & ~same_mask], minlength=N + 1)
    return same, cross


def pair_distance_counts(
    traj: Trajectory,
    d: int,
    nu: int,
    mode: Literal["same", "cross", "all"] = "all",
) -> int:
    """Number of ordered position pairs i < j at Hamming distance exactly d.

    mode restricts to pairs within one length-nu block of steps ("same"),
    across blocks ("cross"), or both ("all").
    """
    if not 0 <= d <= traj.N:
        raise ValueError("d out of range")
    same, cross = pair_distance_histogram(traj, nu)
    if mode == "same":
        return int(same[d])
    if mode == "cross":
        return int(cross[d])
    if mode == "all":
        return int(same[d] + cross[d])
    raise ValueError(f"unknown mode {mode!r}")
