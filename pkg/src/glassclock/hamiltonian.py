"""Energy landscapes along hypercube trajectories.

The landscape value at a configuration sigma is the order-p multilinear form

    H(sigma) = N^{-p/2} * sum over all ordered tuples (i1..ip) of
               J[i1..ip] * sigma_i1 * ... * sigma_ip

with i.i.d. standard normal couplings J.  Along a walk the values form a
centred Gaussian sequence whose covariance depends only on Hamming distance:
kernel(d) = (1 - 2 d / N)^p.

Three interchangeable ways to produce the sequence X(i) = H(position(i)):

* exact disorder: draw the full coupling tensor and evaluate incrementally
  (EnergyState caches per-slot partial contractions so a single-coordinate
  flip costs O(N^{p-1}) instead of O(N^p));
* trajectory-conditional Gaussian sampling: draw X(i) from its conditional
  normal law given a window of previous values, using kernel() at the
  trajectory's pairwise distances (exact when the window spans everything);
* i.i.d. values per distinct visited site (uncorrelated baseline), where
  revisits reuse the stored value.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .walk import SpinConfig, Trajectory, popcount_rows

__all__ = [
    "CouplingTensor",
    "EnergyState",
    "TrajectoryGaussianState",
    "sample_disorder",
    "energy",
    "flip_update",
    "kernel",
    "conditional_energy_sequence",
    "conditional_energy_samples",
    "rem_energy_sequence",
    "trajectory_energy_samples",
]

_SIZE_BUDGET = 2**31


@dataclass(frozen=True)
class CouplingTensor:
    """Frozen disorder realization: flat array of N^p i.i.d. normals."""

    N: int
    p: int
    couplings: np.ndarray

    def __post_init__(self) -> None:
        if len(self.couplings) != self.N**self.p:
            raise ValueError("couplings must have length N^p")

    @property
    def tensor(self) -> np.ndarray:
        return self.couplings.reshape((self.N,) * self.p)


def sample_disorder(N: int, p: int, rng: np.random.Generator) -> CouplingTensor:
    """Draw a fresh coupling tensor; guarded against absurd sizes."""
    size = N**p
    if size > _SIZE_BUDGET:
        raise ValueError(
            f"N^p = {size} exceeds the exact-disorder budget ({_SIZE_BUDGET}); "
            "use conditional_energy_sequence instead"
        )
    values = rng.standard_normal(size)
    values.setflags(write=False)
    return CouplingTensor(N=N, p=p, couplings=values)


def _partial_contraction(
    values: np.ndarray,
    sigma: np.ndarray,
    fixed: dict[int, int],
    free: tuple[int, ...],
) -> np.ndarray:
    """Contract sigma into every slot except `fixed` (pinned to a coordinate)
    and `free` (left as output axes, ordered by slot)."""
    arr = values
    removed: list[int] = []
    for slot in sorted(fixed, reverse=True):
        axis = slot - sum(1 for r in removed if r < slot)
        arr = np.take(arr, fixed[slot], axis=axis)
        removed.append(slot)
    remaining = [s for s in range(values.ndim) if s not in fixed]
    for ax in range(len(remaining) - 1, -1, -1):
        if remaining[ax] not in free:
            arr = np.tensordot(arr, sigma, axes=([ax], [0]))
    return arr


def energy(tensor: CouplingTensor, sigma: SpinConfig) -> float:
    """Full O(N^p) evaluation of the normalized multilinear form."""
    if sigma.N != tensor.N:
        raise ValueError("configuration dimension does not match tensor")
    s = sigma.spins().astype(np.float64)
    total = _partial_contraction(tensor.tensor, s, {}, ())
    return float(total) / tensor.N ** (tensor.p / 2.0)


def kernel(d: int, N: int, p: int) -> float:
    """Covariance of landscape values at Hamming distance d."""
    if not 0 <= d <= N:
        raise ValueError(f"distance {d} out of range 0..{N}")
    return (1.0 - 2.0 * d / N) ** p


@dataclass
class EnergyState:
    """Current configuration, its energy, and the per-slot field cache.

    cache[q, a] holds the contraction of the tensor with the unit vector
    e_a in slot q and the current spins everywhere else; flips update the
    cache in O(p^2 N^{p-1}).  `unnorm` is the raw multilinear form (energy
    times N^{p/2}).
    """

    config: SpinConfig
    energy: float
    unnorm: float
    spins: np.ndarray
    cache: np.ndarray = field(repr=False)

    @classmethod
    def from_config(cls, tensor: CouplingTensor, config: SpinConfig) -> "EnergyState":
        if config.N != tensor.N:
            raise ValueError("configuration dimension does not match tensor")
        s = config.spins().astype(np.float64)
        J = tensor.tensor
        unnorm = float(_partial_contraction(J, s, {}, ()))
        cache = np.stack(
            [_partial_contraction(J, s, {}, (q,)) for q in range(tensor.p)]
        )
        return cls(
            config=config,
            energy=unnorm / tensor.N ** (tensor.p / 2.0),
            unnorm=unnorm,
            spins=s,
            cache=cache,
        )


def flip_update(state: EnergyState, tensor: CouplingTensor, k: int) -> EnergyState:
    """Flip coordinate k in place, updating energy and cache incrementally.

    Expanding the multilinear form around the flip, the energy change is a
    sum over the number j of slots holding coordinate k, each term scaled by
    (-2 sigma_k)^j; the j = 1 terms come straight from the cache and the
    j >= 2 terms are lower-order contractions.
    """
    N, p = tensor.N, tensor.p
    if not 0 <= k < N:
        raise ValueError(f"coordinate {k} out of range for N={N}")
    J = tensor.tensor
    s = state.spins
    sk = s[k]
    slots = range(p)

    delta = -2.0 * sk * state.cache[:, k].sum()
    for j in range(2, p + 1):
        coef = (-2.0 * sk) ** j
        for subset in itertools.combinations(slots, j):
            delta += coef * float(
                _partial_contraction(J, s, {q: k for q in subset}, ())
            )

    for q in slots:
        others = [t for t in slots if t != q]
        for j in range(1, p):
            coef = (-2.0 * sk) ** j
            for subset in itertools.combinations(others, j):
                state.cache[q] += coef * _partial_contraction(
                    J, s, {t: k for t in subset}, (q,)
                )

    state.unnorm += delta
    state.energy = state.unnorm / N ** (p / 2.0)
    s[k] = -sk
    state.config = state.config.flip(k)
    return state


def trajectory_energy_samples(
    traj: Trajectory,
    p: int,
    replicates: int,
    rng: np.random.Generator,
    batch_size: int = 10_000,
) -> np.ndarray:
    """Exact-disorder energies along a fixed trajectory, resampling disorder.

    Returns a (replicates, length+1) matrix; row r is the full energy
    sequence under the r-th independent coupling tensor.  Each column is the
    inner product of the flat tensor with the p-fold Kronecker power of the
    position's spins, so the whole batch is one matrix product.
    """
    N = traj.N
    size = N**p
    if size > _SIZE_BUDGET:
        raise ValueError("N^p exceeds the exact-disorder budget")
    spins = 1.0 - 2.0 * np.unpackbits(
        traj.positions_packed().view(np.uint8), axis=1, bitorder="little"
    ).astype(np.float64)
    spins = spins[:, :N]
    cols = np.empty((size, spins.shape[0]))
    for i, s in enumerate(spins):
        col = s
        for _ in range(p - 1):
            col = np.kron(col, s)
        cols[:, i] = col
    norm = N ** (p / 2.0)
    out = np.empty((replicates, spins.shape[0]))
    done = 0
    while done < replicates:
        b = min(batch_size, replicates - done)
        J = rng.standard_normal((b, size))
        out[done : done + b] = (J @ cols) / norm
        done += b
    return out


@dataclass
class TrajectoryGaussianState:
    """Precomputed per-step conditional weights for one trajectory.

    For step i, X(i) | previous window values is normal with mean
    weights_i . history_window and variance var_i, both determined by the
    kernel at the trajectory's pairwise Hamming distances.
    """

    N: int
    p: int
    window: int
    weights: list[np.ndarray]
    variances: np.ndarray
    window_starts: np.ndarray


_JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


def _conditional_factors(
    traj: Trajectory, p: int, window: int
) -> TrajectoryGaussianState:
    if window < 1:
        raise ValueError("window must be >= 1")
    N = traj.N
    pos = traj.positions_packed()
    L = pos.shape[0]
    weights: list[np.ndarray] = [np.empty(0)]
    variances = np.empty(L)
    variances[0] = 1.0
    starts = np.empty(L, dtype=np.int64)
    starts[0] = 0
    for i in range(1, L):
        lo = max(0, i - window)
        starts[i] = lo
        idx = np.arange(lo, i)
        dists = popcount_rows(pos[idx, None, :] ^ pos[None, idx, :])
        K = (1.0 - 2.0 * dists / N) ** p
        k_vec = (
            1.0 - 2.0 * popcount_rows(pos[idx] ^ pos[i][None, :]) / N
        ) ** p
        a = var = None
        for jit in _JITTERS:
            Kj = K if jit == 0.0 else K + jit * np.eye(len(idx))
            try:
                np.linalg.cholesky(Kj)
                cand = np.linalg.solve(Kj, k_vec)
            except np.linalg.LinAlgError:
                continue
            v = 1.0 - float(k_vec @ cand)
            if v >= -1e-12:
                a, var = cand, max(v, 0.0)
                break
        if a is None:
            raise ValueError(
                f"conditional variance at step {i} stayed non-positive-definite "
                f"after jitter up to {_JITTERS[-1]}"
            )
        weights.append(a)
        variances[i] = var
    return TrajectoryGaussianState(
        N=N, p=p, window=window, weights=weights, variances=variances,
        window_starts=starts,
    )


def conditional_energy_samples(
    traj: Trajectory,
    p: int,
    window: int,
    rng: np.random.Generator,
    replicates: int,
) -> np.ndarray:
    """Sample `replicates` independent energy sequences on one trajectory.

    All rows share the trajectory geometry, so the conditional weights are
    factorized once.  Row-wise the law matches conditional_energy_sequence.
    """
    state = _conditional_factors(traj, p, window)
    L = len(state.variances)
    out = np.empty((replicates, L))
    sds = np.sqrt(state.variances)
    for i in range(L):
        z = rng.standard_normal(replicates)
        if i == 0:
            out[:, 0] = z
            continue
        lo = state.window_starts[i]
        out[:, i] = out[:, lo:i] @ state.weights[i] + sds[i] * z
    return out


def conditional_energy_sequence(
    traj: Trajectory,
    N: int,
    p: int,
    window: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """One Gaussian energy sequence along traj, windowed conditional sampling.

    With window >= traj.length the joint law equals the exact-disorder law
    restricted to the trajectory.
    """
    if N != traj.N:
        raise ValueError("N does not match trajectory dimension")
    return conditional_energy_samples(traj, p, window, rng, replicates=1)[0]


def rem_energy_sequence(
    traj: Trajectory,
    rng: np.random.Generator,
    site_values: dict[bytes, float] | None = None,
) -> np.ndarray:
    """I.i.d. standard normal value per distinct visited site, reused on revisit.

    Draws happen in first-visit order, so extending a trajectory extends the
    sequence without changing earlier values.  Pass `site_values` to share
    bookkeeping across calls.
    """
    if site_values is None:
        site_values = {}
    pos = traj.positions_packed()
    out = np.empty(pos.shape[0])
    for i in range(pos.shape[0]):
        key = pos[i].tobytes()
        val = site_values.get(key)
        if val is None:
            val = float(rng.standard_normal())
            site_values[key] = val
        out[i] = val
    return out
