"""Batch experiment runners tying the simulators to the limit laws.

Each runner consumes an ExperimentConfig, spends replicates against one
statistic family, and returns result rows (point estimates with intervals,
or KS comparisons).  Serialization is deterministic: a rerun with the same
config and master seed produces byte-identical files, which is why wall
times live on the in-memory result objects but never reach disk.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields as dataclass_fields
from pathlib import Path

import numpy as np

from . import __version__
from .blockgauss import (
    BlockSpec,
    deep_block_process,
    exceedance_sweep,
    normal_comparison_bound,
    prop2_functional,
    resampled_max_exceedance,
    sample_blocks,
)
from .dynamics import (
    ConditionalTrajectorySource,
    DisorderTrajectorySource,
    aging_indicator,
    rescaled_path,
    run_rht,
    sup_power_distance,
)
from .engines import SKLockstep, rem_clock_record, rem_record_until
from .hamiltonian import sample_disorder
from .limits import (
    SAParams,
    fixed_time_cdf,
    law_from_scales,
    mc_first_passage,
    sa_error_budget,
    sa_expected_finite,
    sa_p_infinite,
)
from .scales import DerivedScales, ModelParams, derive_scales, threshold_level
from .seeding import stream_rng, stream_seed
from .stats import KSReport, ks_statistic, ks_two_sample, wilson_interval
from .walk import bd_distribution, pair_distance_histogram, stationary_log_weight

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "TrialResult",
    "KSResult",
    "config_from_dict",
    "config_from_json",
    "run_experiment",
    "write_outputs",
    "run_aging",
    "run_fixed_time_law",
    "run_sup_distance",
    "run_block_exceedance",
    "run_resample_exceedance",
    "run_poisson_blocks",
    "run_sa_constants",
    "run_comparison_bound",
    "run_bd_mixing",
    "run_pair_counts",
]

EXPERIMENTS = (
    "aging",
    "fixed-time-law",
    "sup-distance",
    "block-exceedance",
    "resample-exceedance",
    "poisson-blocks",
    "sa-constants",
    "comparison-bound",
    "bd-mixing",
    "pair-counts",
)

_Z975 = 1.959963984540054

_CONFIG_KEYS = {
    "experiment",
    "base",
    "sweep",
    "replicates",
    "master_seed",
    "horizon_T",
    "backend",
    "options",
    "out_dir",
}

_OPTION_KEYS = {
    "aging": {"thetas", "conditional_on_walk", "max_doublings"},
    "fixed-time-law": {"times"},
    "sup-distance": {"epsilon_sup"},
    "block-exceedance": {"xs"},
    "resample-exceedance": {"xs", "rhos"},
    "poisson-blocks": {"delta", "margin_factor"},
    "sa-constants": {"alphas", "mc_d", "mc_replicates", "mc_step_cap"},
    "comparison-bound": {"instances", "mc_draws", "max_dim"},
    "bd-mixing": {"mixing_multiplier"},
    "pair-counts": {"walks", "max_steps"},
}

_BACKENDS = {
    "aging": {"rem", "sk", "exact"},
    "fixed-time-law": {"rem", "sk", "exact", "conditional"},
    "sup-distance": {"rem", "sk"},
    "block-exceedance": {"gauss"},
    "resample-exceedance": {"gauss"},
    "poisson-blocks": {"gauss", "sk", "rem"},
    "sa-constants": {"gauss"},
    "comparison-bound": {"gauss"},
    "bd-mixing": {"gauss"},
    "pair-counts": {"gauss"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment request: parameter sweep, budget, seed, knobs."""

    experiment: str
    param_grid: tuple[ModelParams, ...]
    replicates: int
    master_seed: int
    horizon_T: float = 1.0
    backend: str = "rem"
    out_dir: str | None = None
    options: tuple[tuple[str, object], ...] = ()

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValueError(
                f"unknown experiment {self.experiment!r}; expected one of "
                f"{EXPERIMENTS}"
            )
        if not self.param_grid:
            raise ValueError("parameter grid is empty")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in a u64")
        if self.horizon_T < 0:
            raise ValueError("horizon_T must be nonnegative")
        allowed = _BACKENDS[self.experiment]
        if self.backend not in allowed:
            raise ValueError(
                f"backend {self.backend!r} not supported for "
                f"{self.experiment}; choose from {sorted(allowed)}"
            )
        extra = {k for k, _ in self.options} - _OPTION_KEYS[self.experiment]
        if extra:
            raise ValueError(
                f"unknown options for {self.experiment}: {sorted(extra)}"
            )
        for mp in self.param_grid:
            derive_scales(mp)

    def opt(self, name: str, default=None):
        for key, value in self.options:
            if key == name:
                return value
        return default


@dataclass(frozen=True)
class TrialResult:
    """One estimate row: parameter tuple, point value, interval, bookkeeping."""

    params: tuple[tuple[str, object], ...]
    estimate: float
    ci_lo: float
    ci_hi: float
    truncated_count: int = 0
    wall_time: float = 0.0

    def __post_init__(self) -> None:
        if (
            math.isfinite(self.estimate)
            and math.isfinite(self.ci_lo)
            and math.isfinite(self.ci_hi)
            and not self.ci_lo <= self.estimate <= self.ci_hi
        ):
            raise ValueError("interval must bracket the estimate")


@dataclass(frozen=True)
class KSResult:
    """A KS comparison attached to its parameter tuple."""

    params: tuple[tuple[str, object], ...]
    report: KSReport
    wall_time: float = 0.0


@dataclass(frozen=True)
class ConstantsReport:
    """Extra payload written as a standalone JSON file by write_outputs."""

    filename: str
    payload: tuple


def _freeze(value):
    if isinstance(value, (list, tuple)):
        return tuple(_freeze(v) for v in value)
    if isinstance(value, dict):
        return tuple(sorted((k, _freeze(v)) for k, v in value.items()))
    return value


def config_from_dict(obj: dict) -> ExperimentConfig:
    """Build a validated config from plain JSON-style data."""
    unknown = set(obj) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "experiment" not in obj:
        raise ValueError("config requires 'experiment'")
    base = dict(obj.get("base", {}))
    sweep = obj.get("sweep", {})
    if not isinstance(sweep, dict):
        raise ValueError("'sweep' must map parameter names to value lists")
    keys = sorted(sweep)
    combos = itertools.product(*(sweep[k] for k in keys)) if keys else [()]
    grid = []
    for combo in combos:
        merged = dict(base)
        merged.update(zip(keys, combo))
        grid.append(ModelParams(**merged))
    options = obj.get("options", {})
    if not isinstance(options, dict):
        raise ValueError("'options' must be an object")
    return ExperimentConfig(
        experiment=obj["experiment"],
        param_grid=tuple(grid),
        replicates=int(obj.get("replicates", 100)),
        master_seed=int(obj.get("master_seed", 0)),
        horizon_T=float(obj.get("horizon_T", 1.0)),
        backend=obj.get("backend", _DEFAULT_BACKEND.get(obj["experiment"], "rem")),
        out_dir=obj.get("out_dir"),
        options=tuple(sorted((k, _freeze(v)) for k, v in options.items())),
    )


_DEFAULT_BACKEND = {
    "block-exceedance": "gauss",
    "resample-exceedance": "gauss",
    "poisson-blocks": "gauss",
    "sa-constants": "gauss",
    "comparison-bound": "gauss",
    "bd-mixing": "gauss",
    "pair-counts": "gauss",
}


def config_from_json(text: str) -> ExperimentConfig:
    obj = json.loads(text)
    if not isinstance(obj, dict):
        raise ValueError("config JSON must be an object")
    return config_from_dict(obj)


def _scales_for(mp: ModelParams, backend: str) -> DerivedScales:
    sc = derive_scales(mp)
    return sc.rem_variant() if backend == "rem" else sc


def _param_key(mp: ModelParams) -> str:
    return (
        f"N={mp.N},p={mp.p},beta={mp.beta!r},c={mp.c!r},omega={mp.omega!r}"
    )


def _param_items(mp: ModelParams, backend: str | None = None, **extra):
    items = [("N", mp.N), ("p", mp.p), ("beta", mp.beta)]
    if backend is not None:
        items.append(("backend", backend))
    items.extend(extra.items())
    return tuple(items)


def _seed_set(master: int, experiment: str, pkey: str, replicate: int) -> dict:
    return {
        role: stream_seed(master, experiment, pkey, replicate, role)
        for role in ("disorder", "walk", "holds")
    }


def _map_replicates(worker, args_list, threads: int):
    if threads <= 1:
        return [worker(a) for a in args_list]
    chunk = max(1, len(args_list) // (8 * threads))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, args_list, chunksize=chunk))


def _normal_ci(values: np.ndarray) -> tuple[float, float, float]:
    mean = float(values.mean())
    if values.size > 1:
        half = _Z975 * float(values.std(ddof=1)) / math.sqrt(values.size)
    else:
        half = math.inf
    return mean, mean - half, mean + half


# ---------------------------------------------------------------- aging


def _aging_replicate(args):
    (scales, backend, master, pkey, b, thetas, epsilon, shared_walk, max_dbl) = args
    seeds = _seed_set(master, "aging", pkey, b)
    if shared_walk:
        seeds["walk"] = stream_seed(master, "aging", pkey, 0, "walk")
    theta_max = max(thetas)
    log_target = scales.log_t + math.log1p(theta_max) / scales.alpha
    initial = (
        int(math.ceil(4.0 * scales.r * (1.0 + theta_max) ** (1.0 / scales.beta**2) / scales.K))
        + 16
    )
    if backend == "rem":
        record, traj, _ = rem_record_until(
            scales, seeds, log_target, initial, max_doublings=max_dbl
        )
    else:
        record, traj = _exact_record_until(
            scales, seeds, log_target, initial, max_dbl
        )
    return [
        aging_indicator(record, traj, scales, theta, epsilon) for theta in thetas
    ]


def _exact_record_until(scales, seeds, log_target, initial_steps, max_doublings):
    from .walk import srw_trajectory

    steps = max(int(initial_steps), 16)
    for _ in range(max_doublings + 1):
        rng_d = np.random.Generator(np.random.PCG64(seeds["disorder"]))
        tensor = sample_disorder(scales.N, scales.p, rng_d)
        rng_w = np.random.Generator(np.random.PCG64(seeds["walk"]))
        traj = srw_trajectory(scales.N, steps, rng_w)
        source = DisorderTrajectorySource(tensor, traj)
        rng_h = np.random.Generator(np.random.PCG64(seeds["holds"]))
        record = run_rht(scales, source, steps, rng_h)
        if record.log_S[-1] > log_target:
            return record, traj
        steps *= 2
    return record, traj


def _sk_chunk_size(N: int, replicates: int) -> int:
    return max(1, min(replicates, (1 << 28) // (N * N * 8)))


def run_aging(config: ExperimentConfig, threads: int = 1) -> list:
    thetas = tuple(config.opt("thetas", (0.5, 1.0, 2.0)))
    shared_walk = bool(config.opt("conditional_on_walk", False))
    max_dbl = int(config.opt("max_doublings", 10))
    results = []
    for mp in config.param_grid:
        scales = _scales_for(mp, config.backend)
        pkey = _param_key(mp)
        eps = mp.epsilon_aging
        t0 = time.perf_counter()
        if config.backend == "sk":
            flags = _sk_aging(config, scales, pkey, thetas, eps)
        else:
            args = [
                (
                    scales,
                    config.backend,
                    config.master_seed,
                    pkey,
                    b,
                    thetas,
                    eps,
                    shared_walk,
                    max_dbl,
                )
                for b in range(config.replicates)
            ]
            flags = _map_replicates(_aging_replicate, args, threads)
        wall = time.perf_counter() - t0
        for j, theta in enumerate(thetas):
            trunc = sum(1 for rep in flags if rep[j][1])
            valid = config.replicates - trunc
            if valid == 0:
                raise RuntimeError(
                    f"all {config.replicates} replicates truncated at "
                    f"theta={theta}; raise max_doublings or the horizon"
                )
            hits = sum(1 for rep in flags if rep[j][0] and not rep[j][1])
            lo, hi = wilson_interval(hits, valid)
            results.append(
                TrialResult(
                    params=_param_items(mp, config.backend, theta=theta),
                    estimate=hits / valid,
                    ci_lo=lo,
                    ci_hi=hi,
                    truncated_count=trunc,
                    wall_time=wall / len(thetas),
                )
            )
    return results


def _sk_aging(config, scales, pkey, thetas, eps):
    levels = [scales.log_t] + [
        scales.log_t + math.log1p(th) / scales.alpha for th in thetas
    ]
    theta_max = max(thetas)
    step_cap = int(
        math.ceil(
            24.0
            * scales.r
            * (1.0 + theta_max) ** (1.0 / scales.beta**2)
            / scales.K
        )
    )
    flags = []
    chunk = _sk_chunk_size(scales.N, config.replicates)
    for start in range(0, config.replicates, chunk):
        idx = range(start, min(start + chunk, config.replicates))
        seed_sets = [
            _seed_set(config.master_seed, "aging", pkey, b) for b in idx
        ]
        if config.opt("conditional_on_walk", False):
            shared = stream_seed(config.master_seed, "aging", pkey, 0, "walk")
            for s in seed_sets:
                s["walk"] = shared
        engine = SKLockstep(scales, seed_sets)
        batch = engine.run_until(np.array(levels), step_cap)
        limit = scales.N * eps / 2.0
        for b in range(len(seed_sets)):
            rep = []
            for j in range(len(thetas)):
                truncated = bool(batch.truncated[b, 0] or batch.truncated[b, j + 1])
                ind = (not truncated) and batch.distance(b, 0, j + 1) <= limit
                rep.append((ind, truncated))
            flags.append(rep)
    return flags


# ------------------------------------------------------- fixed-time law


def _fixed_time_replicate(args):
    (scales, backend, master, pkey, b, times, steps, window) = args
    seeds = _seed_set(master, "fixed-time-law", pkey, b)
    if backend == "rem":
        record, _ = rem_clock_record(scales, seeds, steps)
    else:
        from .walk import srw_trajectory

        rng_w = np.random.Generator(np.random.PCG64(seeds["walk"]))
        traj = srw_trajectory(scales.N, steps, rng_w)
        rng_d = np.random.Generator(np.random.PCG64(seeds["disorder"]))
        if backend == "exact":
            source = DisorderTrajectorySource(
                sample_disorder(scales.N, scales.p, rng_d), traj
            )
        else:
            source = ConditionalTrajectorySource(traj, scales.p, window, rng_d)
        rng_h = np.random.Generator(np.random.PCG64(seeds["holds"]))
        record = run_rht(scales, source, steps, rng_h)
    out = []
    for t in times:
        if t == 0:
            out.append((0.0, 0.0))
            continue
        pm = rescaled_path(record, scales, "maximal", t)
        ps = rescaled_path(record, scales, "clock", t)
        out.append((pm.value_at(t), ps.value_at(t)))
    return out


def run_fixed_time_law(config: ExperimentConfig, threads: int = 1) -> list:
    times = tuple(config.opt("times", (1.0,)))
    results = []
    for mp in config.param_grid:
        scales = _scales_for(mp, config.backend)
        law = law_from_scales(scales)
        pkey = _param_key(mp)
        steps = max(int(math.ceil(max(times) * scales.r)), 1)
        t0 = time.perf_counter()
        if config.backend == "sk":
            values = _sk_fixed_time(config, scales, pkey, times, steps)
        else:
            window = 4 * scales.nu
            args = [
                (
                    scales,
                    config.backend,
                    config.master_seed,
                    pkey,
                    b,
                    times,
                    steps,
                    window,
                )
                for b in range(config.replicates)
            ]
            values = _map_replicates(_fixed_time_replicate, args, threads)
        wall = time.perf_counter() - t0
        for i, t in enumerate(times):
            vmax = np.array([rep[i][0] for rep in values])
            vclk = np.array([rep[i][1] for rep in values])
            if t == 0:
                # both the samples and the limit are the point mass at zero
                for which in ("maximal", "clock"):
                    results.append(
                        KSResult(
                            params=_param_items(
                                mp, config.backend, t=t, which=which
                            ),
                            report=KSReport(
                                statistic=0.0,
                                n=len(vmax),
                                p_value=1.0,
                                target="fixed_time(t=0)",
                            ),
                            wall_time=wall / len(times),
                        )
                    )
                continue
            target = f"fixed_time(t={t})"
            for which, vals in (("maximal", vmax), ("clock", vclk)):
                rep = ks_statistic(
                    vals, lambda x: fixed_time_cdf(law, t, x), target=target
                )
                results.append(
                    KSResult(
                        params=_param_items(mp, config.backend, t=t, which=which),
                        report=rep,
                        wall_time=wall / len(times),
                    )
                )
            results.append(
                KSResult(
                    params=_param_items(
                        mp, config.backend, t=t, which="clock-vs-maximal"
                    ),
                    report=ks_two_sample(vclk, vmax, target="clock-vs-maximal"),
                    wall_time=wall / len(times),
                )
            )
    return results


def _sk_fixed_time(config, scales, pkey, times, steps):
    values = []
    chunk = _sk_chunk_size(scales.N, config.replicates)
    for start in range(0, config.replicates, chunk):
        idx = range(start, min(start + chunk, config.replicates))
        seed_sets = [
            _seed_set(config.master_seed, "fixed-time-law", pkey, b) for b in idx
        ]
        engine = SKLockstep(scales, seed_sets)
        for record in engine.run_fixed(steps):
            rep = []
            for t in times:
                if t == 0:
                    rep.append((0.0, 0.0))
                    continue
                pm = rescaled_path(record, scales, "maximal", t)
                ps = rescaled_path(record, scales, "clock", t)
                rep.append((pm.value_at(t), ps.value_at(t)))
            values.append(rep)
    return values


# --------------------------------------------------------- sup distance


def _sup_distance_replicate(args):
    (scales, master, pkey, b, T, steps) = args
    seeds = _seed_set(master, "sup-distance", pkey, b)
    record, _ = rem_clock_record(scales, seeds, steps)
    sup = sup_power_distance(record, scales, T)
    n = int(math.ceil(T * scales.r))
    ratio = math.exp(record.log_S[n] - record.log_m[n])
    return sup, ratio


def run_sup_distance(config: ExperimentConfig, threads: int = 1) -> list:
    eps = float(config.opt("epsilon_sup", 0.25))
    T = config.horizon_T
    results = []
    for mp in config.param_grid:
        scales = _scales_for(mp, config.backend)
        pkey = _param_key(mp)
        steps = max(int(math.ceil(T * scales.r)), 1)
        t0 = time.perf_counter()
        if config.backend == "sk":
            pairs = []
            chunk = _sk_chunk_size(scales.N, config.replicates)
            for start in range(0, config.replicates, chunk):
                idx = range(start, min(start + chunk, config.replicates))
                seed_sets = [
                    _seed_set(config.master_seed, "sup-distance", pkey, b)
                    for b in idx
                ]
                engine = SKLockstep(scales, seed_sets)
                for record in engine.run_fixed(steps):
                    sup = sup_power_distance(record, scales, T)
                    n = int(math.ceil(T * scales.r))
                    pairs.append(
                        (sup, math.exp(record.log_S[n] - record.log_m[n]))
                    )
        else:
            args = [
                (scales, config.master_seed, pkey, b, T, steps)
                for b in range(config.replicates)
            ]
            pairs = _map_replicates(_sup_distance_replicate, args, threads)
        wall = time.perf_counter() - t0
        sups = np.array([p[0] for p in pairs])
        ratios = np.array([p[1] for p in pairs]) * scales.alpha**2
        hits = int((sups > eps).sum())
        lo, hi = wilson_interval(hits, len(sups))
        results.append(
            TrialResult(
                params=_param_items(
                    mp, config.backend, metric="sup_exceedance", epsilon=eps
                ),
                estimate=hits / len(sups),
                ci_lo=lo,
                ci_hi=hi,
                wall_time=wall,
            )
        )
        est, lo, hi = _percentile_with_ci(ratios, 0.95)
        results.append(
            TrialResult(
                params=_param_items(mp, config.backend, metric="ratio_p95"),
                estimate=est,
                ci_lo=lo,
                ci_hi=hi,
                wall_time=wall,
            )
        )
    return results


def _percentile_with_ci(values: np.ndarray, q: float) -> tuple[float, float, float]:
    """Order-statistic interval for a quantile (binomial index bounds)."""
    srt = np.sort(values)
    n = srt.size
    est = float(np.percentile(srt, 100 * q))
    if n < 2:
        return est, -math.inf, math.inf
    spread = _Z975 * math.sqrt(n * q * (1 - q))
    j_lo = max(int(math.floor(n * q - spread)), 0)
    j_hi = min(int(math.ceil(n * q + spread)), n - 1)
    return est, float(srt[j_lo]), float(srt[j_hi])


# ----------------------------------------------------- block exceedance


def run_block_exceedance(config: ExperimentConfig, threads: int = 1) -> list:
    xs = tuple(config.opt("xs", (0.5, 1.0, 2.0)))
    results = []
    for mp in config.param_grid:
        scales = derive_scales(mp)
        spec = BlockSpec.from_scales(scales)
        pkey = _param_key(mp)
        rng = stream_rng(config.master_seed, "block-exceedance", pkey, 0, "aux")
        t0 = time.perf_counter()
        rows = exceedance_sweep(spec, scales, xs, config.replicates, rng)
        wall = time.perf_counter() - t0
        for row in rows:
            target = scales.K * row["x"] ** (-1.0 / scales.beta**2)
            results.append(
                TrialResult(
                    params=_param_items(mp, x=row["x"], target=target),
                    estimate=row["estimate"],
                    ci_lo=row["ci_lo"],
                    ci_hi=row["ci_hi"],
                    wall_time=wall / len(xs),
                )
            )
    return results


def run_resample_exceedance(config: ExperimentConfig, threads: int = 1) -> list:
    xs = tuple(config.opt("xs", (1.0,)))
    rhos = tuple(config.opt("rhos", (0.5, 1.0, 2.0)))
    results = []
    for mp in config.param_grid:
        scales = derive_scales(mp)
        spec = BlockSpec.from_scales(scales)
        pkey = _param_key(mp)
        for x in xs:
            for rho in rhos:
                key = f"{pkey}|x={x!r}|rho={rho!r}"
                t0 = time.perf_counter()
                est, ci = resampled_max_exceedance(
                    spec,
                    scales,
                    x,
                    rho,
                    config.replicates,
                    stream_rng(config.master_seed, "resample-exceedance", key, 0, "aux"),
                )
                fun, fci = prop2_functional(
                    spec,
                    scales,
                    x,
                    rho,
                    config.replicates,
                    stream_rng(config.master_seed, "resample-exceedance", key, 1, "aux"),
                )
                wall = time.perf_counter() - t0
                results.append(
                    TrialResult(
                        params=_param_items(
                            mp, x=x, rho=rho, metric="masked_max"
                        ),
                        estimate=est,
                        ci_lo=ci[0],
                        ci_hi=ci[1],
                        wall_time=wall / 2,
                    )
                )
                results.append(
                    TrialResult(
                        params=_param_items(
                            mp, x=x, rho=rho, metric="expected_functional"
                        ),
                        estimate=fun,
                        ci_lo=fci[0],
                        ci_hi=fci[1],
                        wall_time=wall / 2,
                    )
                )
    return results


# ------------------------------------------------------- poisson blocks


def run_poisson_blocks(config: ExperimentConfig, threads: int = 1) -> list:
    delta = float(config.opt("delta", 1.0))
    margin = float(config.opt("margin_factor", 3.0))
    T = config.horizon_T
    if T <= 0:
        raise ValueError("poisson-blocks requires horizon_T > 0")
    results = []
    for mp in config.param_grid:
        scales = _scales_for(mp, config.backend)
        pkey = _param_key(mp)
        rho = scales.K * delta ** (-1.0 / scales.beta**2)
        T_sim = margin * T
        n_T = int(math.floor(T * scales.r / scales.nu))
        t0 = time.perf_counter()
        if config.backend == "gauss":
            counts, gaps = _gauss_deep_blocks(config, scales, pkey, delta, T_sim, n_T)
        else:
            counts, gaps = _record_deep_blocks(config, scales, pkey, delta, T_sim, n_T)
        wall = time.perf_counter() - t0
        counts = np.asarray(counts, dtype=float)
        est, lo, hi = _normal_ci(counts)
        results.append(
            TrialResult(
                params=_param_items(
                    mp, config.backend, delta=delta, metric="count_mean",
                    target=rho * T,
                ),
                estimate=est,
                ci_lo=lo,
                ci_hi=hi,
                wall_time=wall / 3,
            )
        )
        if counts.mean() > 0 and counts.size > 1:
            dispersion = float(counts.var(ddof=1) / counts.mean())
            half = _Z975 * math.sqrt(2.0 / (counts.size - 1))
            results.append(
                TrialResult(
                    params=_param_items(
                        mp, config.backend, delta=delta, metric="dispersion"
                    ),
                    estimate=dispersion,
                    ci_lo=dispersion - half,
                    ci_hi=dispersion + half,
                    wall_time=wall / 3,
                )
            )
        if len(gaps) >= 8:
            gaps = np.asarray(gaps)
            report = ks_statistic(
                gaps,
                lambda g: -math.expm1(-rho * g) if g > 0 else 0.0,
                target=f"exp_gap(rho={rho:.6g})",
            )
            results.append(
                KSResult(
                    params=_param_items(
                        mp, config.backend, delta=delta, which="gaps"
                    ),
                    report=report,
                    wall_time=wall / 3,
                )
            )
    return results


def _gauss_deep_blocks(config, scales, pkey, delta, T_sim, n_T):
    """Independent-block landscape: block maxima drawn directly."""
    spec = BlockSpec.from_scales(scales)
    level = threshold_level(scales, scales.N, scales.beta, delta)
    n_blocks = int(math.floor(T_sim * scales.r / scales.nu))
    rng = stream_rng(config.master_seed, "poisson-blocks", pkey, 0, "aux")
    spacing = scales.nu / scales.r
    counts = []
    gaps: list[float] = []
    chunk = max(1, (1 << 22) // max(n_blocks * spec.nu, 1))
    done = 0
    while done < config.replicates:
        b = min(chunk, config.replicates - done)
        u = sample_blocks(spec, b * n_blocks, rng).reshape(b, n_blocks, spec.nu)
        hits = (u.max(axis=2) >= level)
        counts.extend(hits[:, :n_T].sum(axis=1).tolist())
        for row in hits:
            idx = np.flatnonzero(row)
            if idx.size >= 2:
                left = idx[:-1] * spacing
                keep = left < config.horizon_T
                gaps.extend((np.diff(idx)[keep] * spacing).tolist())
        done += b
    return counts, gaps


def _record_deep_blocks(config, scales, pkey, delta, T_sim, n_T):
    """Deep blocks read off simulated clock records."""
    steps = int(math.ceil(T_sim * scales.r)) + 1
    spacing = scales.nu / scales.r
    counts = []
    gaps: list[float] = []

    def consume(record):
        times = deep_block_process(record, scales, delta, T_sim)
        ks = np.rint(times / spacing).astype(int)
        counts.append(int((ks < n_T).sum()))
        if times.size >= 2:
            left = times[:-1]
            keep = left < config.horizon_T
            gaps.extend(np.diff(times)[keep].tolist())

    if config.backend == "sk":
        chunk = _sk_chunk_size(scales.N, config.replicates)
        for start in range(0, config.replicates, chunk):
            idx = range(start, min(start + chunk, config.replicates))
            seed_sets = [
                _seed_set(config.master_seed, "poisson-blocks", pkey, b)
                for b in idx
            ]
            engine = SKLockstep(scales, seed_sets)
            for record in engine.run_fixed(steps):
                consume(record)
    else:
        for b in range(config.replicates):
            seeds = _seed_set(config.master_seed, "poisson-blocks", pkey, b)
            record, _ = rem_clock_record(scales, seeds, steps)
            consume(record)
    return counts, gaps


# --------------------------------------------------------- SA constants


def run_sa_constants(config: ExperimentConfig, threads: int = 1) -> list:
    alphas = tuple(config.opt("alphas", (1e-2, 1e-3, 1e-4)))
    mc_d = float(config.opt("mc_d", 0.1))
    mc_replicates = int(config.opt("mc_replicates", 100_000))
    mc_step_cap = int(config.opt("mc_step_cap", 1_000_000))
    mp = config.param_grid[0]
    beta, p = mp.beta, mp.p
    results = []
    payload = []
    for alpha in alphas:
        d = alpha * math.sqrt(p) / beta
        params = SAParams(d_N=d)
        t0 = time.perf_counter()
        p_inf = sa_p_infinite(params)
        e_tau = sa_expected_finite(params)
        budget = sa_error_budget(params)
        wall = time.perf_counter() - t0
        cert = max(budget["p_infinite"], budget["expected_finite"])
        payload.append(
            {
                "alpha": alpha,
                "d_N": d,
                "p_inf": p_inf,
                "p_inf_over_alpha": p_inf / alpha,
                "e_tau_finite": e_tau,
                "alpha_times_e_tau": alpha * e_tau,
                "certified_error": cert,
            }
        )
        results.append(
            TrialResult(
                params=(("beta", beta), ("p", p), ("alpha", alpha),
                        ("metric", "p_inf_over_alpha")),
                estimate=p_inf / alpha,
                ci_lo=(p_inf - budget["p_infinite"]) / alpha,
                ci_hi=(p_inf + budget["p_infinite"]) / alpha,
                wall_time=wall / 2,
            )
        )
        results.append(
            TrialResult(
                params=(("beta", beta), ("p", p), ("alpha", alpha),
                        ("metric", "alpha_times_e_tau")),
                estimate=alpha * e_tau,
                ci_lo=alpha * (e_tau - budget["expected_finite"]),
                ci_hi=alpha * (e_tau + budget["expected_finite"]),
                wall_time=wall / 2,
            )
        )
    rng = stream_rng(config.master_seed, "sa-constants", f"d={mc_d!r}", 0, "aux")
    t0 = time.perf_counter()
    survival, _, info = mc_first_passage(mc_d, mc_replicates, mc_step_cap, rng)
    wall = time.perf_counter() - t0
    series = SAParams(d_N=mc_d)
    results.append(
        TrialResult(
            params=(("d_N", mc_d), ("metric", "mc_survival")),
            estimate=survival,
            ci_lo=info["survival"][0],
            ci_hi=info["survival"][1],
            truncated_count=info["truncated_count"],
            wall_time=wall,
        )
    )
    results.append(
        TrialResult(
            params=(("d_N", mc_d), ("metric", "series_survival")),
            estimate=sa_p_infinite(series),
            ci_lo=sa_p_infinite(series) - sa_error_budget(series)["p_infinite"],
            ci_hi=sa_p_infinite(series) + sa_error_budget(series)["p_infinite"],
            wall_time=0.0,
        )
    )
    results.append(
        TrialResult(
            params=(("d_N", mc_d), ("metric", "mc_restricted_mean")),
            estimate=info["restricted_mean"],
            ci_lo=info["restricted_mean_ci"][0],
            ci_hi=info["restricted_mean_ci"][1],
            truncated_count=info["truncated_count"],
            wall_time=0.0,
        )
    )
    results.append(
        TrialResult(
            params=(("d_N", mc_d), ("metric", "series_expected")),
            estimate=sa_expected_finite(series),
            ci_lo=sa_expected_finite(series)
            - sa_error_budget(series)["expected_finite"],
            ci_hi=sa_expected_finite(series)
            + sa_error_budget(series)["expected_finite"],
            wall_time=0.0,
        )
    )
    results.append(
        ConstantsReport(filename="sa_constants.json", payload=tuple(payload))
    )
    return results


# ----------------------------------------------------- comparison bound


def _random_correlation(n: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((n, n + 2))
    c = a @ a.T
    d = 1.0 / np.sqrt(np.diag(c))
    corr = c * d[:, None] * d[None, :]
    np.fill_diagonal(corr, 1.0)
    return (corr + corr.T) / 2.0


def _orthant_mc(corr, u, draws, rng) -> float:
    vals, vecs = np.linalg.eigh(corr)
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))
    z = rng.standard_normal((draws, corr.shape[0]))
    x = z @ root.T
    return float((x <= u[None, :]).all(axis=1).mean())


def run_comparison_bound(config: ExperimentConfig, threads: int = 1) -> list:
    instances = int(config.opt("instances", 50))
    draws = int(config.opt("mc_draws", 200_000))
    max_dim = int(config.opt("max_dim", 4))
    rng = stream_rng(config.master_seed, "comparison-bound", "instances", 0, "aux")
    results = []
    for i in range(instances):
        n = int(rng.integers(1, max_dim + 1))
        cov0 = _random_correlation(n, rng)
        cov1 = _random_correlation(n, rng)
        u = rng.uniform(-1.5, 1.5, n)
        t0 = time.perf_counter()
        bound = normal_comparison_bound(cov0, cov1, u)
        p1 = _orthant_mc(cov1, u, draws, rng)
        p0 = _orthant_mc(cov0, u, draws, rng)
        wall = time.perf_counter() - t0
        diff = p1 - p0
        sigma = math.sqrt(
            p1 * (1 - p1) / draws + p0 * (1 - p0) / draws
        )
        results.append(
            TrialResult(
                params=(("instance", i), ("n", n), ("metric", "difference")),
                estimate=diff,
                ci_lo=diff - _Z975 * sigma,
                ci_hi=diff + _Z975 * sigma,
                wall_time=wall,
            )
        )
        results.append(
            TrialResult(
                params=(("instance", i), ("n", n), ("metric", "bound")),
                estimate=bound,
                ci_lo=bound,
                ci_hi=bound,
                wall_time=0.0,
            )
        )
    return results


# ------------------------------------------------------------ bd mixing


def run_bd_mixing(config: ExperimentConfig, threads: int = 1) -> list:
    mult = int(config.opt("mixing_multiplier", 5))
    results = []
    for mp in config.param_grid:
        N = mp.N
        pkey = _param_key(mp)
        pi = np.exp([stationary_log_weight(N, d) for d in range(N + 1)])
        t0 = time.perf_counter()
        # The jump chain is 2-periodic, so raw k-step laws never settle;
        # averaging two consecutive steps removes the parity and the
        # smoothed law collapses onto the binomial once k ~ N^2 log N.
        ks = [c * N for c in range(1, 6)]
        ks.append(int(math.ceil(mult * N * N * math.log(N))))
        for k in ks:
            lazy = 0.5 * (bd_distribution(N, k, 0) + bd_distribution(N, k + 1, 0))
            sup = float(np.abs(lazy - pi).max())
            results.append(
                TrialResult(
                    params=_param_items(mp, metric="lazy_sup_distance", steps=k),
                    estimate=sup,
                    ci_lo=sup,
                    ci_hi=sup,
                    wall_time=0.0,
                )
            )
        k = 5 * N
        rng = stream_rng(config.master_seed, "bd-mixing", pkey, 0, "aux")
        R = config.replicates
        hist = np.zeros(N + 1, dtype=np.int64)
        chunk = max(1, (1 << 23) // k)
        done = 0
        while done < R:
            b = min(chunk, R - done)
            flips = rng.integers(0, N, size=(b, k))
            flat = flips + N * np.arange(b)[:, None]
            parity = np.bincount(flat.ravel(), minlength=b * N).reshape(b, N) % 2
            hist += np.bincount(parity.sum(axis=1), minlength=N + 1)
            done += b
        emp = hist / R
        exact = bd_distribution(N, k, 0)
        sup = float(np.abs(np.cumsum(emp) - np.cumsum(exact)).max())
        dkw = math.sqrt(math.log(2 / 0.05) / (2 * R))
        wall = time.perf_counter() - t0
        results.append(
            TrialResult(
                params=_param_items(mp, metric="sup_cdf_distance", steps=k),
                estimate=sup,
                ci_lo=max(sup - dkw, 0.0),
                ci_hi=sup + dkw,
                wall_time=wall,
            )
        )
    return results


# ----------------------------------------------------------- pair counts


def run_pair_counts(config: ExperimentConfig, threads: int = 1) -> list:
    walks = int(config.opt("walks", 20))
    max_steps = int(config.opt("max_steps", 20_000))
    results = []
    for mp in config.param_grid:
        scales = derive_scales(mp)
        pkey = _param_key(mp)
        steps = min(max(int(math.ceil(config.horizon_T * scales.r)), 2), max_steps)
        thresh = int(mp.N * mp.epsilon_aging / 2)
        same_counts = []
        cross_counts = []
        t0 = time.perf_counter()
        for b in range(walks):
            rng = stream_rng(config.master_seed, "pair-counts", pkey, b, "walk")
            from .walk import srw_trajectory

            traj = srw_trajectory(mp.N, steps, rng)
            same, cross = pair_distance_histogram(traj, scales.nu)
            same_counts.append(float(same[: thresh + 1].sum()))
            cross_counts.append(float(cross[: thresh + 1].sum()))
        wall = time.perf_counter() - t0
        for metric, vals in (
            ("same_block_close_pairs", same_counts),
            ("cross_block_close_pairs", cross_counts),
        ):
            est, lo, hi = _normal_ci(np.array(vals))
            results.append(
                TrialResult(
                    params=_param_items(mp, metric=metric, steps=steps),
                    estimate=est,
                    ci_lo=lo,
                    ci_hi=hi,
                    wall_time=wall / 2,
                )
            )
    return results


# ---------------------------------------------------------- dispatching


_RUNNERS = {
    "aging": run_aging,
    "fixed-time-law": run_fixed_time_law,
    "sup-distance": run_sup_distance,
    "block-exceedance": run_block_exceedance,
    "resample-exceedance": run_resample_exceedance,
    "poisson-blocks": run_poisson_blocks,
    "sa-constants": run_sa_constants,
    "comparison-bound": run_comparison_bound,
    "bd-mixing": run_bd_mixing,
    "pair-counts": run_pair_counts,
}


def run_experiment(config: ExperimentConfig, threads: int = 1) -> list:
    """Dispatch to the named runner; returns result objects in stable order."""
    return _RUNNERS[config.experiment](config, threads=threads)


# -------------------------------------------------------- serialization


def _jsonable(value):
    if isinstance(value, (np.floating,)):
        value = float(value)
    if isinstance(value, (np.integer,)):
        value = int(value)
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def result_record(config: ExperimentConfig, result) -> dict:
    """JSON-ready dict for one result; wall time deliberately excluded."""
    base = {"experiment": config.experiment}
    if isinstance(result, TrialResult):
        base.update(
            {
                "kind": "trial",
                "params": {k: _jsonable(v) for k, v in result.params},
                "estimate": _jsonable(result.estimate),
                "ci_lo": _jsonable(result.ci_lo),
                "ci_hi": _jsonable(result.ci_hi),
                "truncated_count": int(result.truncated_count),
            }
        )
    elif isinstance(result, KSResult):
        base.update(
            {
                "kind": "ks",
                "params": {k: _jsonable(v) for k, v in result.params},
                "statistic": _jsonable(result.report.statistic),
                "n": int(result.report.n),
                "p_value": _jsonable(result.report.p_value),
                "target": result.report.target,
            }
        )
    else:
        raise TypeError(f"unserializable result {type(result)!r}")
    return base


def config_digest(config: ExperimentConfig) -> str:
    payload = {
        "experiment": config.experiment,
        "param_grid": [
            {f.name: getattr(mp, f.name) for f in dataclass_fields(mp)}
            for mp in config.param_grid
        ],
        "replicates": config.replicates,
        "master_seed": config.master_seed,
        "horizon_T": config.horizon_T,
        "backend": config.backend,
        "options": _jsonable(config.options),
    }
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def write_outputs(config: ExperimentConfig, results: list, out_dir) -> dict:
    """Write results.jsonl, the per-experiment CSV, manifest.json, extras."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    extras = []
    for r in results:
        if isinstance(r, ConstantsReport):
            extras.append(r)
        else:
            records.append(result_record(config, r))
    jsonl_path = out / "results.jsonl"
    with open(jsonl_path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")))
            fh.write("\n")
    param_keys = sorted({k for rec in records for k in rec["params"]})
    value_keys = [
        "estimate",
        "ci_lo",
        "ci_hi",
        "truncated_count",
        "statistic",
        "n",
        "p_value",
        "target",
    ]
    csv_path = out / f"{config.experiment}.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", *param_keys, *value_keys])
        for rec in records:
            row = [rec["kind"]]
            row += [_csv_cell(rec["params"].get(k)) for k in param_keys]
            row += [_csv_cell(rec.get(k)) for k in value_keys]
            writer.writerow(row)
    for extra in extras:
        with open(out / extra.filename, "w") as fh:
            json.dump(
                _jsonable(list(extra.payload)),
                fh,
                sort_keys=True,
                separators=(",", ":"),
            )
            fh.write("\n")
    manifest = {
        "config_hash": config_digest(config),
        "experiment": config.experiment,
        "master_seed": config.master_seed,
        "version": __version__,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
    return manifest


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value
