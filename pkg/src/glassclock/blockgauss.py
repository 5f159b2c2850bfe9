"""Block-structured Gaussian comparison process and exceedance statistics.

Within one block of length nu the target law is a centred Gaussian vector
with unit variances and covariance 1 - 2 p |i - j| / N, realised exactly by
the signed-prefix representation

    U_i = g1 Z_1 + g Z_2 + ... + g Z_i - g Z_{i+1} - ... - g Z_nu,

with g1 = sqrt(1 - p (nu-1) / N), g = sqrt(p / N), so that the squared
weights sum to one.  Blocks are independent, which makes the block maximum
the natural unit: (r / nu) * P(block max >= threshold(x)) approaches
K / x^(1/beta^2).

Also here: the Bernoulli(rho alpha^2) resampling mask and its masked-max
estimator, the expected-exceedance functional (r / nu) E[1 - exp(-rho
alpha^2 #exceedances)], a quadrature evaluation of the pairwise normal
comparison bound for orthant probabilities, and extraction of deep-block
times from a simulated clock record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .scales import DerivedScales, threshold_level
from .dynamics import ClockRecord
from .stats import wilson_interval

__all__ = [
    "BlockSpec",
    "ResampleMask",
    "sample_block",
    "sample_blocks",
    "block_max_exceedance",
    "resample_mask",
    "resampled_max_exceedance",
    "prop2_functional",
    "exceedance_sweep",
    "exceedance_count_stats",
    "normal_comparison_bound",
    "deep_block_process",
    "block_maxima",
]


@dataclass(frozen=True)
class BlockSpec:
    """Geometry of one Gaussian block: length and prefix weights."""

    nu: int
    N: int
    p: int
    gamma1: float
    gamma: float

    @classmethod
    def create(cls, N: int, p: int, nu: int) -> "BlockSpec":
        if nu < 1:
            raise ValueError("nu must be >= 1")
        if p * (nu - 1) >= N:
            raise ValueError(
                f"block too long: need p*(nu-1) < N, got p={p}, nu={nu}, N={N}"
            )
        gamma1 = math.sqrt(1.0 - p * (nu - 1) / N)
        gamma = math.sqrt(p / N)
        spec = cls(nu=nu, N=N, p=p, gamma1=gamma1, gamma=gamma)
        total = spec.gamma1**2 + (nu - 1) * spec.gamma**2
        if abs(total - 1.0) > 1e-12:
            raise AssertionError(f"weight normalization off: {total}")
        return spec

    @classmethod
    def from_scales(cls, scales: DerivedScales) -> "BlockSpec":
        return cls.create(N=scales.N, p=scales.p, nu=scales.nu)


def sample_blocks(
    spec: BlockSpec, count: int, rng: np.random.Generator
) -> np.ndarray:
    """(count, nu) matrix of independent blocks via the signed-prefix form."""
    z = rng.standard_normal((count, spec.nu))
    z[:, 0] *= spec.gamma1
    if spec.nu > 1:
        z[:, 1:] *= spec.gamma
    prefix = np.cumsum(z, axis=1)
    return 2.0 * prefix - prefix[:, -1:]


def sample_block(spec: BlockSpec, rng: np.random.Generator) -> np.ndarray:
    """One length-nu block."""
    return sample_blocks(spec, 1, rng)[0]


@dataclass(frozen=True)
class ResampleMask:
    """Sparse Bernoulli selection of block indices at density rho alpha^2."""

    length: int
    density: float
    indices: np.ndarray


def resample_mask(
    length: int, rho: float, alpha: float, rng: np.random.Generator
) -> ResampleMask:
    density = rho * alpha**2
    if density < 0:
        raise ValueError("negative selection density")
    if density > 1:
        raise ValueError(f"selection density rho*alpha^2 = {density} exceeds 1")
    keep = rng.random(length) < density
    return ResampleMask(
        length=length, density=density, indices=np.flatnonzero(keep)
    )


_BATCH = 1 << 16


def _sweep_core(
    spec: BlockSpec,
    scales: DerivedScales,
    xs,
    replicates: int,
    rng: np.random.Generator,
    rho: float | None,
) -> dict:
    """Shared Monte Carlo pass over blocks.

    One block draw feeds every threshold in `xs` (common random numbers),
    and when `rho` is given the Bernoulli masks come from a spawned child
    stream so the block values stay identical to an unmasked run with the
    same seed.
    """
    if spec.N != scales.N or spec.p != scales.p:
        raise ValueError("block spec and scales disagree on N or p")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    thresholds = np.array(
        [threshold_level(scales, scales.N, scales.beta, x) for x in xs]
    )
    density = None
    mask_rng = None
    if rho is not None:
        density = rho * scales.alpha**2
        if density > 1:
            raise ValueError(f"selection density rho*alpha^2 = {density} exceeds 1")
        mask_rng = rng.spawn(1)[0]
    n_x = len(xs)
    exceed_max = np.zeros(n_x, dtype=np.int64)
    exceed_masked = np.zeros(n_x, dtype=np.int64)
    count_sum = np.zeros(n_x, dtype=np.float64)
    count_sum_given_hit = np.zeros(n_x, dtype=np.float64)
    functional_sum = np.zeros(n_x, dtype=np.float64)
    functional_sq = np.zeros(n_x, dtype=np.float64)
    done = 0
    while done < replicates:
        b = min(_BATCH, replicates - done)
        u = sample_blocks(spec, b, rng)
        row_max = u.max(axis=1)
        exceed_max += (row_max[:, None] >= thresholds[None, :]).sum(axis=0)
        counts = (u[:, :, None] >= thresholds[None, None, :]).sum(axis=1)
        count_sum += counts.sum(axis=0)
        count_sum_given_hit += np.where(counts > 0, counts, 0).sum(axis=0)
        if density is not None:
            keep = mask_rng.random((b, spec.nu)) < density
            masked = np.where(keep, u, -np.inf).max(axis=1)
            exceed_masked += (masked[:, None] >= thresholds[None, :]).sum(axis=0)
            g = 1.0 - np.exp(-density * counts)
            functional_sum += g.sum(axis=0)
            functional_sq += (g**2).sum(axis=0)
        done += b
    return {
        "xs": xs,
        "replicates": replicates,
        "exceed_max": exceed_max,
        "exceed_masked": exceed_masked,
        "count_sum": count_sum,
        "count_sum_given_hit": count_sum_given_hit,
        "functional_sum": functional_sum,
        "functional_sq": functional_sq,
    }


def _scaled_wilson(hits: int, n: int, scale: float) -> tuple[float, tuple[float, float]]:
    lo, hi = wilson_interval(hits, n)
    return scale * hits / n, (scale * lo, scale * hi)


def block_max_exceedance(
    spec: BlockSpec,
    scales: DerivedScales,
    x: float,
    replicates: int,
    rng: np.random.Generator,
) -> tuple[float, tuple[float, float]]:
    """(r / nu) P(block max >= threshold(x)), Wilson interval rescaled."""
    core = _sweep_core(spec, scales, [x], replicates, rng, rho=None)
    scale = scales.r / spec.nu
    return _scaled_wilson(int(core["exceed_max"][0]), replicates, scale)


def resampled_max_exceedance(
    spec: BlockSpec,
    scales: DerivedScales,
    x: float,
    rho: float,
    replicates: int,
    rng: np.random.Generator,
) -> tuple[float, tuple[float, float]]:
    """Masked variant: the max runs over Bernoulli(rho alpha^2) indices only."""
    if rho == 0:
        return 0.0, (0.0, 0.0)
    core = _sweep_core(spec, scales, [x], replicates, rng, rho=rho)
    scale = scales.r / spec.nu
    return _scaled_wilson(int(core["exceed_masked"][0]), replicates, scale)


def prop2_functional(
    spec: BlockSpec,
    scales: DerivedScales,
    x: float,
    rho: float,
    replicates: int,
    rng: np.random.Generator,
) -> tuple[float, tuple[float, float]]:
    """(r / nu) E[1 - exp(-rho alpha^2 #{i: U_i >= threshold(x)})] with normal CI."""
    if rho == 0:
        return 0.0, (0.0, 0.0)
    core = _sweep_core(spec, scales, [x], replicates, rng, rho=rho)
    n = replicates
    mean = core["functional_sum"][0] / n
    var = max(core["functional_sq"][0] / n - mean**2, 0.0)
    half = 1.959963984540054 * math.sqrt(var / n)
    scale = scales.r / spec.nu
    return scale * mean, (scale * max(mean - half, 0.0), scale * (mean + half))


def exceedance_sweep(
    spec: BlockSpec,
    scales: DerivedScales,
    xs,
    replicates: int,
    rng: np.random.Generator,
    rho: float | None = None,
) -> list[dict]:
    """Rows (x, rho, estimate, ci_lo, ci_hi, replicates) sharing one stream.

    With rho set, the estimate is the masked-max version; block draws are
    identical to the unmasked sweep under the same seed.
    """
    core = _sweep_core(spec, scales, xs, replicates, rng, rho=rho)
    scale = scales.r / spec.nu
    rows = []
    hits_key = "exceed_max" if rho is None else "exceed_masked"
    for i, x in enumerate(core["xs"]):
        est, (lo, hi) = _scaled_wilson(int(core[hits_key][i]), replicates, scale)
        rows.append(
            {
                "x": float(x),
                "rho": rho,
                "estimate": est,
                "ci_lo": lo,
                "ci_hi": hi,
                "replicates": replicates,
            }
        )
    return rows


def exceedance_count_stats(
    spec: BlockSpec,
    scales: DerivedScales,
    x: float,
    replicates: int,
    rng: np.random.Generator,
) -> dict:
    """Hit rate and conditional mean exceedance count given at least one."""
    core = _sweep_core(spec, scales, [x], replicates, rng, rho=None)
    hits = int(core["exceed_max"][0])
    cond_mean = (
        core["count_sum_given_hit"][0] / hits if hits else float("nan")
    )
    return {
        "x": float(x),
        "hit_rate": hits / replicates,
        "conditional_mean_count": cond_mean,
        "mean_count": core["count_sum"][0] / replicates,
        "replicates": replicates,
    }


def _validate_correlation(name: str, mat: np.ndarray) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be square")
    n = mat.shape[0]
    if n > 12:
        raise ValueError(f"{name} too large (n={n} > 12)")
    if not np.allclose(mat, mat.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    if not np.allclose(np.diag(mat), 1.0, atol=1e-12):
        raise ValueError(f"{name} must have unit diagonal")
    if np.linalg.eigvalsh(mat).min() < -1e-10:
        raise ValueError(f"{name} must be positive semidefinite")
    return mat


def normal_comparison_bound(cov0, cov1, u) -> float:
    """Quadrature bound on P(xi <= u) - P(mu <= u) for correlated normals.

    xi has correlation matrix cov1 and mu has cov0.  Each pair (i, j) with
    cov1_ij > cov0_ij contributes

        (cov1_ij - cov0_ij) / (2 pi) * integral over h in [0,1] of
        (1 - L^2)^(-1/2) exp(-(u_i^2 + u_j^2 - 2 L u_i u_j) / (2 (1 - L^2)))

    where L interpolates linearly between the two entries.  Pairs with no
    positive part contribute exactly zero, so equal inputs return 0.0.
    """
    lam0 = _validate_correlation("cov0", cov0)
    lam1 = _validate_correlation("cov1", cov1)
    if lam0.shape != lam1.shape:
        raise ValueError("cov0 and cov1 must have the same shape")
    u = np.asarray(u, dtype=float)
    n = lam0.shape[0]
    if u.shape != (n,):
        raise ValueError("u has wrong length")
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            diff = lam1[i, j] - lam0[i, j]
            if diff <= 0.0:
                continue
            a, b = lam0[i, j], lam1[i, j]
            ui, uj = u[i], u[j]

            def integrand(h: float) -> float:
                lam = a + h * (b - a)
                q = 1.0 - lam * lam
                if q <= 1e-300:
                    # only reachable when lam -> +-1; the exponent then
                    # carries -(ui -+ uj)^2 / (2q), which kills the pole
                    # unless the u's coincide, where the 1/sqrt(q) blowup
                    # is still integrable over h
                    return 0.0
                num = ui * ui + uj * uj - 2.0 * lam * ui * uj
                return math.exp(-num / (2.0 * q)) / math.sqrt(q)

            # refine near |lam| = 1 where the integrand peaks
            points = []
            for target in (-0.99, 0.99, -1.0, 1.0):
                if abs(b - a) > 0:
                    h_t = (target - a) / (b - a)
                    if 0.0 < h_t < 1.0:
                        points.append(h_t)
            val, _err = quad(
                integrand,
                0.0,
                1.0,
                epsrel=1e-6,
                epsabs=1e-14,
                limit=200,
                points=sorted(points) or None,
            )
            total += diff * val / (2.0 * math.pi)
    return total


def block_maxima(energies: np.ndarray, nu: int, n_blocks: int) -> np.ndarray:
    """Max energy per block k over indices k nu + 1 .. (k+1) nu."""
    if len(energies) < n_blocks * nu + 1:
        raise ValueError("energy sequence too short for requested blocks")
    return np.asarray(energies[1 : n_blocks * nu + 1]).reshape(n_blocks, nu).max(axis=1)


def deep_block_process(
    record: ClockRecord, scales: DerivedScales, delta: float, T: float
) -> np.ndarray:
    """Times k nu / r of blocks whose max energy reaches threshold(delta).

    Blocks partition the step axis into stretches of nu jumps; a block is
    deep when some energy in it exceeds the level at which a single hold
    outlasts delta^(1/alpha) times the observation time.
    """
    n_blocks = int(math.floor(T * scales.r / scales.nu))
    if record.length < math.ceil(T * scales.r):
        raise ValueError(
            f"record too short: T={T} needs {math.ceil(T * scales.r)} steps, "
            f"got {record.length}"
        )
    if n_blocks < 1:
        return np.empty(0)
    level = threshold_level(scales, scales.N, scales.beta, delta)
    maxima = block_maxima(record.energies, scales.nu, n_blocks)
    hits = np.flatnonzero(maxima >= level)
    return hits * scales.nu / scales.r
