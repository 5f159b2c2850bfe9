"""Small statistical helpers: KS distances, empirical CDFs, Wilson intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "KSReport",
    "empirical_cdf",
    "ks_statistic",
    "ks_two_sample",
    "kolmogorov_sf",
    "wilson_interval",
]

_Z975 = 1.959963984540054


@dataclass(frozen=True)
class KSReport:
    """One-sample KS comparison of data against a target CDF."""

    statistic: float
    n: int
    p_value: float
    target: str


def empirical_cdf(samples):
    """Right-continuous empirical CDF as a callable (scalars or arrays)."""
    xs = np.sort(np.asarray(samples, dtype=float))
    if xs.size == 0:
        raise ValueError("empirical_cdf needs at least one sample")

    def cdf(x):
        out = np.searchsorted(xs, np.asarray(x, dtype=float), side="right") / xs.size
        return float(out) if np.ndim(x) == 0 else out

    return cdf


def kolmogorov_sf(t: float) -> float:
    """P(sup |Brownian bridge| > t), truncated when terms drop below 1e-10."""
    if t <= 0:
        return 1.0
    total = 0.0
    for k in range(1, 1000):
        term = 2.0 * (-1.0) ** (k - 1) * math.exp(-2.0 * k * k * t * t)
        total += term
        if abs(term) < 1e-10:
            break
    return min(max(total, 0.0), 1.0)


def ks_statistic(samples, cdf, target: str = "") -> KSReport:
    """One-sample KS statistic against a callable CDF, asymptotic p-value."""
    xs = np.sort(np.asarray(samples, dtype=float))
    n = xs.size
    if n == 0:
        raise ValueError("ks_statistic needs at least one sample")
    f = np.asarray([cdf(x) for x in xs], dtype=float)
    grid = np.arange(n, dtype=float)
    d_plus = ((grid + 1.0) / n - f).max()
    d_minus = (f - grid / n).max()
    d = max(d_plus, d_minus, 0.0)
    return KSReport(
        statistic=float(d),
        n=int(n),
        p_value=kolmogorov_sf(math.sqrt(n) * d),
        target=target,
    )


def ks_two_sample(a, b, target: str = "two-sample") -> KSReport:
    """Two-sample KS with effective size n1 n2 / (n1 + n2)."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("ks_two_sample needs nonempty inputs")
    support = np.concatenate([a, b])
    fa = np.searchsorted(a, support, side="right") / a.size
    fb = np.searchsorted(b, support, side="right") / b.size
    d = float(np.abs(fa - fb).max())
    n_eff = a.size * b.size / (a.size + b.size)
    return KSReport(
        statistic=d,
        n=int(n_eff),
        p_value=kolmogorov_sf(math.sqrt(n_eff) * d),
        target=target,
    )


def wilson_interval(successes: int, trials: int) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes out of range")
    z = _Z975
    phat = successes / trials
    denom = 1.0 + z * z / trials
    centre = phat + z * z / (2.0 * trials)
    half = z * math.sqrt(phat * (1.0 - phat) / trials + z * z / (4.0 * trials**2))
    lo = 0.0 if successes == 0 else max((centre - half) / denom, 0.0)
    hi = 1.0 if successes == trials else min((centre + half) / denom, 1.0)
    return lo, hi
