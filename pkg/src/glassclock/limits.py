"""Closed-form limit objects and first-passage series.

The powered clock and maximal processes converge to an extremal process:
the running max of a Poisson point process on time x level whose level
measure has the heavy tail K * x^(-1/beta^2).  This module evaluates that
process's finite-dimensional laws, samples its paths, and computes the
Sparre Andersen series for the first passage of a Gaussian walk with
upward drift below zero, with a certified truncation error.

Series acceleration: both series have terms f(k) with f convex, positive
and decreasing, so the tail past m equals the midpoint integral from
m + 1/2 with error at most (f''(m+1/2) - f'(m+1/2)) / 24 (midpoint rule
error summed against the monotone second derivative).  The head is summed
directly; m doubles until the certificate meets tail_tol.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr

from .dynamics import SteppedPath
from .scales import DerivedScales
from .stats import wilson_interval

__all__ = [
    "ExtremalLaw",
    "SAParams",
    "SeriesEvaluation",
    "law_from_scales",
    "fixed_time_cdf",
    "fdd_cdf",
    "sample_extremal_path",
    "aging_function",
    "range_gap_probability",
    "sa_mgf",
    "sa_p_infinite",
    "sa_expected_finite",
    "sa_error_budget",
    "mc_first_passage",
    "k2_constant",
]

_FLOOR_MASS = -math.log(1e-12)
_DEFAULT_CAP = 1 << 27
_Z975 = 1.959963984540054


@dataclass(frozen=True)
class ExtremalLaw:
    """Frechet-tailed extremal process: level measure K * x^(-1/beta^2)."""

    beta: float
    K: float

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.K > 0:
            raise ValueError("K must be positive")


def law_from_scales(scales: DerivedScales) -> ExtremalLaw:
    return ExtremalLaw(beta=scales.beta, K=scales.K)


def _rate(law: ExtremalLaw, dt: float, x: float) -> float:
    """Exponent measure mass over (x, inf) accumulated for a dt stretch."""
    if x <= 0.0:
        return math.inf
    return law.K * dt * x ** (-1.0 / law.beta**2)


def fixed_time_cdf(law: ExtremalLaw, t: float, x: float) -> float:
    """P(process value at time t is at most x)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 1.0 if x >= 0 else 0.0
    if x <= 0:
        return 0.0
    return math.exp(-_rate(law, t, x))


def fdd_cdf(law: ExtremalLaw, times, xs) -> float:
    """Joint CDF P(value at t_k <= x_k for all k).

    Times must be positive and nondecreasing.  Levels may be arbitrary:
    they are reduced to their running suffix minimum, since a bound at a
    later time constrains every earlier one.  The result is the product
    over increments of the single-increment factor, accumulated left to
    right, so prefixes of the product equal shorter evaluations exactly.
    """
    times = np.asarray(times, dtype=float)
    xs = np.asarray(xs, dtype=float)
    if times.ndim != 1 or times.shape != xs.shape or times.size == 0:
        raise ValueError("times and xs must be equal-length 1-d arrays")
    if times[0] <= 0 or np.any(np.diff(times) < 0):
        raise ValueError("times must be positive and nondecreasing")
    suffix_min = np.minimum.accumulate(xs[::-1])[::-1]
    prev_t = 0.0
    prob = 1.0
    for t, m in zip(times, suffix_min):
        prob *= math.exp(-_rate(law, t - prev_t, m))
        prev_t = t
    return prob


def sample_extremal_path(
    law: ExtremalLaw, T: float, floor_x0: float, rng: np.random.Generator
) -> SteppedPath:
    """One path on [0, T] as the running max of Poisson points above a floor.

    Points below floor_x0 are censored; the floor must sit low enough that
    the path has left it by any positive time with overwhelming probability,
    otherwise the censoring would bias the marginals.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if floor_x0 <= 0:
        raise ValueError("floor_x0 must be positive")
    lam = _rate(law, T, floor_x0)
    if lam < _FLOOR_MASS:
        raise ValueError(
            f"floor too high: P(path never leaves the floor) = exp(-{lam:.4g}) "
            "exceeds 1e-12 and would bias the sampled marginals; lower floor_x0"
        )
    n = int(rng.poisson(lam))
    times = np.sort(rng.uniform(0.0, T, n))
    levels = floor_x0 * (1.0 - rng.random(n)) ** (-law.beta**2)
    running = np.maximum.accumulate(levels)
    prev = np.concatenate([[floor_x0], running[:-1]])
    keep = running > prev
    return SteppedPath(
        times=np.concatenate([[0.0], times[keep]]),
        values=np.concatenate([[floor_x0], running[keep]]),
    )


def range_gap_probability(law: ExtremalLaw, a: float, b: float) -> float:
    """P(the path's range skips the whole interval (a, b])."""
    if not 0 < a <= b:
        raise ValueError("need 0 < a <= b")
    return (a / b) ** (1.0 / law.beta**2)


def aging_function(beta: float, theta: float) -> float:
    """Limit probability of the two-time aging event at lag theta."""
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    law = ExtremalLaw(beta=beta, K=1.0)
    return range_gap_probability(law, 1.0, 1.0 + theta)


@dataclass(frozen=True)
class SAParams:
    """Inputs for the first-passage series of the drifted Gaussian walk."""

    d_N: float
    series_cap: int | None = None
    tail_tol: float = 1e-10

    def __post_init__(self) -> None:
        if not self.d_N > 0:
            raise ValueError("d_N must be positive")
        if not self.tail_tol > 0:
            raise ValueError("tail_tol must be positive")
        if self.series_cap is not None and self.series_cap < 1:
            raise ValueError("series_cap must be >= 1 when given")


@dataclass(frozen=True)
class SeriesEvaluation:
    """Accelerated series value with its certified error bound."""

    value: float
    head_terms: int
    tail_integral: float
    certified_error: float


def _gauss_sf(y: float) -> float:
    return float(ndtr(-y))


def _gauss_pdf(y: float) -> float:
    return math.exp(-0.5 * y * y) / math.sqrt(2.0 * math.pi)


def _f_derivatives(d: float, x: float, weighted: bool) -> tuple[float, float]:
    """(f', f'') at x for f(x) = sf(d sqrt x), optionally divided by x."""
    y = d * math.sqrt(x)
    pdf = _gauss_pdf(y)
    f2 = _gauss_sf(y)
    d_f2 = -pdf * d / (2.0 * math.sqrt(x))
    dd_f2 = (d**4 / 4.0) * pdf * (1.0 / y + 1.0 / y**3)
    if not weighted:
        return d_f2, dd_f2
    d_f1 = d_f2 / x - f2 / x**2
    dd_f1 = dd_f2 / x - 2.0 * d_f2 / x**2 + 2.0 * f2 / x**3
    return d_f1, dd_f1


def _tail_integral(d: float, x0: float, weighted: bool) -> tuple[float, float]:
    """Integral of f from x0 to infinity and a bound on its evaluation error."""
    y0 = d * math.sqrt(x0)
    if y0 >= 38.0:
        return 0.0, 1e-300
    if not weighted:
        val = ((1.0 - y0**2) * _gauss_sf(y0) + y0 * _gauss_pdf(y0)) / d**2
        return val, abs(val) * 1e-12
    # substitute u = e^v to tame the near-origin 1/u factor
    val, err = quad(
        lambda v: _gauss_sf(math.exp(v)),
        math.log(y0),
        math.log(40.0),
        epsabs=1e-14,
        epsrel=1e-12,
        limit=200,
    )
    return 2.0 * val, 2.0 * err


def _head_sum(d: float, m: int, weighted: bool) -> float:
    chunk = 1 << 22
    parts = []
    for start in range(1, m + 1, chunk):
        ks = np.arange(start, min(start + chunk, m + 1), dtype=np.float64)
        vals = ndtr(-d * np.sqrt(ks))
        if weighted:
            vals /= ks
        parts.append(float(vals.sum()))
    return math.fsum(parts)


@functools.lru_cache(maxsize=128)
def _series(d: float, weighted: bool, tail_tol: float, cap: int) -> SeriesEvaluation:
    """Sum f(k) over k >= 1 for f(x) = sf(d sqrt x) (over x when weighted)."""
    m = min(1024, cap)
    while True:
        fp, fpp = _f_derivatives(d, m + 0.5, weighted)
        certificate = (fpp - fp) / 24.0
        if certificate <= 0.9 * tail_tol or m >= cap:
            break
        m = min(2 * m, cap)
    if certificate > 0.9 * tail_tol:
        raise ValueError(
            f"tail tolerance {tail_tol} unattainable at series cap {cap}: "
            f"certified bound is {certificate:.3g}"
        )
    tail, tail_err = _tail_integral(d, m + 0.5, weighted)
    head = _head_sum(d, m, weighted)
    return SeriesEvaluation(
        value=head + tail,
        head_terms=m,
        tail_integral=tail,
        certified_error=certificate + tail_err,
    )


def _series_pair(params: SAParams) -> tuple[SeriesEvaluation, SeriesEvaluation]:
    cap = params.series_cap if params.series_cap is not None else _DEFAULT_CAP
    s1 = _series(params.d_N, True, params.tail_tol, cap)
    s2 = _series(params.d_N, False, params.tail_tol, cap)
    return s1, s2


def sa_mgf(params: SAParams, s: float) -> float:
    """Generating function of the first passage time, evaluated at s."""
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    if s == 0.0:
        return 0.0
    if s == 1.0:
        s1, _ = _series_pair(params)
        return -math.expm1(-s1.value)
    cap = params.series_cap if params.series_cap is not None else _DEFAULT_CAP
    d = params.d_N
    m = min(1024, cap)
    while True:
        bound = (
            _gauss_sf(d * math.sqrt(m + 1.0))
            * s ** (m + 1.0)
            / ((m + 1.0) * (1.0 - s))
        )
        if bound <= params.tail_tol or m >= cap:
            break
        m = min(2 * m, cap)
    if bound > params.tail_tol:
        raise ValueError(
            f"tail tolerance {params.tail_tol} unattainable at series cap "
            f"{cap} for s={s}: geometric bound is {bound:.3g}"
        )
    chunk = 1 << 22
    parts = []
    for start in range(1, m + 1, chunk):
        ks = np.arange(start, min(start + chunk, m + 1), dtype=np.float64)
        terms = ndtr(-d * np.sqrt(ks)) * np.exp(ks * math.log(s)) / ks
        parts.append(float(terms.sum()))
    return -math.expm1(-math.fsum(parts))


def sa_p_infinite(params: SAParams) -> float:
    """Probability the drifted walk never goes below zero."""
    s1, _ = _series_pair(params)
    return math.exp(-s1.value)


def sa_expected_finite(params: SAParams) -> float:
    """Expected passage time restricted to the event that passage happens."""
    s1, s2 = _series_pair(params)
    return math.exp(-s1.value) * s2.value


def sa_error_budget(params: SAParams) -> dict:
    """Certified absolute errors propagated to the reported quantities."""
    s1, s2 = _series_pair(params)
    p_inf = math.exp(-s1.value)
    return {
        "series_log_survival": s1.certified_error,
        "series_expected": s2.certified_error,
        "p_infinite": p_inf * s1.certified_error,
        "expected_finite": p_inf
        * (s2.value * s1.certified_error + s2.certified_error),
        "head_terms": max(s1.head_terms, s2.head_terms),
    }


def mc_first_passage(
    d_N: float,
    replicates: int,
    step_cap: int,
    rng: np.random.Generator,
    collect_taus: bool = False,
) -> tuple[float, float, dict]:
    """Monte Carlo first passage of the drifted walk below zero.

    Walks that climb past 9 / d_N without having crossed are declared
    survivors early: from that height the crossing probability is below
    exp(-18).  Walks still undecided at step_cap are counted as survivors
    and reported in the truncated count.
    """
    if d_N <= 0:
        raise ValueError("d_N must be positive")
    if replicates < 1 or step_cap < 1:
        raise ValueError("replicates and step_cap must be >= 1")
    barrier = 9.0 / d_N
    batch = 4096
    block = 1024
    survivors = 0
    truncated = 0
    tau_chunks: list[np.ndarray] = []
    remaining = replicates
    while remaining:
        b = min(batch, remaining)
        remaining -= b
        level = np.zeros(b)
        steps = 0
        while level.size and steps < step_cap:
            blk = min(block, step_cap - steps)
            increments = rng.standard_normal((level.size, blk)) + d_N
            path = level[:, None] + np.cumsum(increments, axis=1)
            neg = path < 0.0
            crossed = neg.any(axis=1)
            if crossed.any():
                tau_chunks.append(
                    steps + 1 + neg[crossed].argmax(axis=1).astype(np.int64)
                )
            final = path[:, -1]
            safe = ~crossed & (final >= barrier)
            survivors += int(safe.sum())
            keep = ~crossed & ~safe
            level = final[keep]
            steps += blk
        truncated += level.size
        survivors += level.size
    taus = (
        np.concatenate(tau_chunks) if tau_chunks else np.empty(0, dtype=np.int64)
    )
    survival = survivors / replicates
    s_lo, s_hi = wilson_interval(survivors, replicates)
    if taus.size:
        mean_tau = float(taus.mean())
        if taus.size > 1:
            half = _Z975 * float(taus.std(ddof=1)) / math.sqrt(taus.size)
        else:
            half = math.inf
        m_ci = (mean_tau - half, mean_tau + half)
    else:
        mean_tau = math.nan
        m_ci = (math.nan, math.nan)
    # restricted mean counts survivors as zero: the estimand of the series
    restricted = float(taus.sum()) / replicates
    zeros = replicates - taus.size
    sq = float((taus.astype(np.float64) ** 2).sum())
    r_var = max(sq / replicates - restricted**2, 0.0) * (zeros + taus.size > 1)
    r_half = _Z975 * math.sqrt(r_var / replicates)
    info = {
        "survival": (s_lo, s_hi),
        "mean_tau_finite": m_ci,
        "restricted_mean": restricted,
        "restricted_mean_ci": (restricted - r_half, restricted + r_half),
        "truncated_count": truncated,
        "finite_count": int(taus.size),
    }
    if collect_taus:
        info["taus"] = taus
    return survival, mean_tau, info


def k2_constant(
    beta: float, p: int, alphas=(1e-2, 1e-3, 1e-4), tail_tol: float = 1e-10
) -> float:
    """Drift-scaled limit of alpha * E[tau; tau finite], by extrapolation.

    Evaluates the series on a geometric alpha ladder and applies one Aitken
    step, which removes a single power-law error term exactly.
    """
    if len(alphas) != 3:
        raise ValueError("need exactly three ladder points")
    vals = []
    for alpha in alphas:
        params = SAParams(d_N=alpha * math.sqrt(p) / beta, tail_tol=tail_tol)
        vals.append(alpha * sa_expected_finite(params))
    x0, x1, x2 = vals
    denom = (x2 - x1) - (x1 - x0)
    if denom == 0:
        return x2
    return x2 - (x2 - x1) ** 2 / denom
