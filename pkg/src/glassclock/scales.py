"""Model parameters and the derived simulation scales.

Everything downstream of this module is phrased in terms of a small bundle
of numbers computed here: the sub-exponential observation time ``t = exp(alpha * N)``
with ``alpha = N**-c``, the jump-count scale ``r`` over which the clock
process accumulates mass of order ``t``, the block length ``nu = floor(N**omega)``
used by block estimators, and the limit constants ``K``, ``K1`` and the
drift ``d_N`` that appear in the limit laws.

Times are kept in log-domain throughout (``t`` itself overflows float64 for
modest ``N``), so this module hands out ``log_t`` rather than ``t``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace
from typing import Any, Mapping

import numpy as np

__all__ = [
    "ModelParams",
    "DerivedScales",
    "derive_scales",
    "threshold_level",
    "power_normalize",
    "params_from_dict",
    "params_from_json",
]

_PARAM_FIELDS = ("N", "p", "beta", "c", "omega", "epsilon_aging", "theta")


@dataclass(frozen=True)
class ModelParams:
    """Static description of one simulation cell.

    N:              number of spins (hypercube dimension)
    p:              interaction order (2 = pairwise, 3 = triplet, ...)
    beta:           inverse temperature
    c:              time-scale exponent, alpha = N**-c, with 0 < c < 1/2
    omega:          block exponent, nu = floor(N**omega), 1/2 + c < omega < 1
    epsilon_aging:  Hamming slack (fraction of N/2) for the two-time overlap event
    theta:          relative gap between the two observation times
    """

    N: int
    p: int = 2
    beta: float = 1.0
    c: float = 0.3
    omega: float = 0.81
    epsilon_aging: float = 0.5
    theta: float = 1.0

    def __post_init__(self) -> None:
        if not isinstance(self.N, int) or self.N < 2:
            raise ValueError(f"N must be an integer >= 2, got {self.N!r}")
        if not isinstance(self.p, int) or self.p < 2:
            raise ValueError(f"p must be an integer >= 2, got {self.p!r}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta!r}")
        if not 0.0 < self.c < 0.5:
            raise ValueError(f"c must lie in (0, 1/2), got {self.c!r}")
        if not 0.5 + self.c < self.omega < 1.0:
            raise ValueError(
                f"omega must lie in (1/2 + c, 1) = ({0.5 + self.c}, 1), got {self.omega!r}"
            )
        if not 0.0 < self.epsilon_aging < 1.0:
            raise ValueError(
                f"epsilon_aging must lie in (0, 1), got {self.epsilon_aging!r}"
            )
        if self.theta < 0:
            raise ValueError(f"theta must be >= 0, got {self.theta!r}")
        nu = int(math.floor(self.N**self.omega))
        if self.p * (nu - 1) >= self.N:
            raise ValueError(
                f"block length nu={nu} too long: need p*(nu-1) < N "
                f"(got p={self.p}, N={self.N}); lower omega or raise N"
            )
        if self.p == 3 and self.c >= 0.25:
            warnings.warn(
                "p == 3 limit laws are only expected to hold for c < 1/4; "
                f"c={self.c} runs are exploratory",
                stacklevel=2,
            )

    @property
    def nu(self) -> int:
        return int(math.floor(self.N**self.omega))


def params_from_dict(obj: Mapping[str, Any]) -> ModelParams:
    """Build ModelParams from a plain mapping, rejecting unknown keys."""
    unknown = set(obj) - set(_PARAM_FIELDS)
    if unknown:
        raise ValueError(f"unknown parameter keys: {sorted(unknown)}")
    if "N" not in obj:
        raise ValueError("parameter 'N' is required")
    return ModelParams(**dict(obj))


def params_from_json(text: str) -> ModelParams:
    """Parse a JSON object into ModelParams (unknown keys are an error)."""
    obj = json.loads(text)
    if not isinstance(obj, dict):
        raise ValueError("parameter JSON must be an object")
    return params_from_dict(obj)


@dataclass(frozen=True)
class DerivedScales:
    """Scales derived from ModelParams.

    alpha:  N**-c
    log_t:  natural log of the observation time, alpha * N
    r:      jump-count scale sqrt(2 pi N) * exp(alpha^2 N / (2 beta^2)) / (alpha beta)
    nu:     block length floor(N**omega)
    K:      limit rate constant 2 p / beta^2 for correlated landscapes
    K1:     first-passage escape constant sqrt(2 p) / beta
    d_N:    per-step drift alpha sqrt(p) / beta of the comparison random walk

    N, beta and p are carried along for convenience so that threshold and
    estimator code can work from a single object.
    """

    alpha: float
    log_t: float
    r: float
    nu: int
    K: float
    K1: float
    d_N: float
    N: int
    beta: float
    p: int

    def rem_variant(self) -> "DerivedScales":
        """Scales for an uncorrelated (random-energy) landscape.

        Deep sites are alpha^-2 times rarer per jump without the smooth
        in-block correlation, so the jump-count scale shrinks by alpha^2 and
        the limit rate constant becomes exactly 1.
        """
        return replace(self, r=self.alpha**2 * self.r, K=1.0)


def derive_scales(params: ModelParams) -> DerivedScales:
    """Compute DerivedScales from validated ModelParams."""
    N, p, beta = params.N, params.p, params.beta
    alpha = float(N) ** (-params.c)
    log_t = alpha * N
    r = math.sqrt(2.0 * math.pi * N) * math.exp(alpha**2 * N / (2.0 * beta**2)) / (alpha * beta)
    return DerivedScales(
        alpha=alpha,
        log_t=log_t,
        r=r,
        nu=params.nu,
        K=2.0 * p / beta**2,
        K1=math.sqrt(2.0 * p) / beta,
        d_N=alpha * math.sqrt(p) / beta,
        N=N,
        beta=beta,
        p=p,
    )


def threshold_level(scales: DerivedScales, N: int, beta: float, x: float) -> float:
    """Energy level whose exceedance marks a powered-clock value of x.

    A single landscape value X makes the rescaled, alpha-powered weight
    ``(exp(beta sqrt(N) X) / t)**alpha`` exceed x exactly when X exceeds this
    level: alpha sqrt(N) / beta + log(x) / (alpha beta sqrt(N)).
    """
    if not x > 0:
        raise ValueError(f"x must be positive, got {x!r}")
    sqrt_n = math.sqrt(N)
    return scales.alpha * sqrt_n / beta + math.log(x) / (scales.alpha * beta * sqrt_n)


def power_normalize(log_y, alpha: float):
    """Map log-domain magnitudes to the alpha-powered scale exp(alpha * log_y).

    Accepts scalars or arrays; -inf maps to 0. alpha must be positive (it is
    a power, not a rate).
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    return np.exp(alpha * np.asarray(log_y, dtype=float))
