"""Deterministic RNG stream derivation.

Every stochastic component gets its own generator, keyed by (master seed,
experiment, parameter key, replicate, role).  The key tuple's repr is
hashed with SHA-256 and the digest feeds a SeedSequence, so streams are
stable across runs and independent of execution order or thread count.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["ROLES", "stream_seed", "stream_rng"]

ROLES = ("disorder", "walk", "holds", "aux")


def stream_seed(
    master: int,
    experiment: str,
    param_key: str = "",
    replicate: int = 0,
    role: str = "aux",
) -> np.random.SeedSequence:
    """SeedSequence derived from the hashed key tuple."""
    if role not in ROLES:
        raise ValueError(f"unknown role {role!r}; expected one of {ROLES}")
    key = repr((int(master), str(experiment), str(param_key), int(replicate), role))
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 32, 4)]
    return np.random.SeedSequence(words)


def stream_rng(
    master: int,
    experiment: str,
    param_key: str = "",
    replicate: int = 0,
    role: str = "aux",
) -> np.random.Generator:
    """PCG64 generator for the given stream key."""
    return np.random.Generator(
        np.random.PCG64(
            stream_seed(master, experiment, param_key, replicate, role)
        )
    )
