"""Monte Carlo laboratory for hopping dynamics on the hypercube.

The package simulates a continuous-time walk whose jump chain is the simple
random walk on {-1,+1}^N and whose holding times are exponentials stretched
by a Gaussian landscape.  At sub-exponential observation times the elapsed
clock is ruled by a handful of deep visits, and the modules here measure
that regime: clock and maximal processes, aging indicators, block-Gaussian
exceedance rates, deep-block point processes, first-passage constants, and
the closed-form limit laws they are tested against.
"""

__version__ = "0.1.0"

from .scales import (
    DerivedScales,
    ModelParams,
    derive_scales,
    params_from_dict,
    params_from_json,
    power_normalize,
    threshold_level,
)
from .walk import (
    SpinConfig,
    Trajectory,
    bd_distribution,
    bd_step_distribution,
    pair_distance_counts,
    pair_distance_histogram,
    srw_trajectory,
    stationary_log_weight,
)
from .hamiltonian import (
    CouplingTensor,
    EnergyState,
    conditional_energy_samples,
    conditional_energy_sequence,
    energy,
    flip_update,
    kernel,
    rem_energy_sequence,
    sample_disorder,
    trajectory_energy_samples,
)
from .dynamics import (
    ArrayEnergySource,
    ClockRecord,
    ConditionalTrajectorySource,
    DisorderTrajectorySource,
    RemTrajectorySource,
    SteppedPath,
    aging_indicator,
    build_clock_record,
    clock_inverse,
    coarse_grain,
    default_horizon,
    rescaled_path,
    run_rht,
    sup_power_distance,
)
from .blockgauss import (
    BlockSpec,
    block_max_exceedance,
    block_maxima,
    deep_block_process,
    exceedance_sweep,
    normal_comparison_bound,
    prop2_functional,
    resample_mask,
    resampled_max_exceedance,
    sample_blocks,
)
from .limits import (
    ExtremalLaw,
    SAParams,
    aging_function,
    fdd_cdf,
    fixed_time_cdf,
    k2_constant,
    law_from_scales,
    mc_first_passage,
    range_gap_probability,
    sa_error_budget,
    sa_expected_finite,
    sa_mgf,
    sa_p_infinite,
    sample_extremal_path,
)
from .stats import (
    KSReport,
    empirical_cdf,
    kolmogorov_sf,
    ks_statistic,
    ks_two_sample,
    wilson_interval,
)
from .seeding import stream_rng, stream_seed
from .engines import (
    CrossingBatch,
    SKLockstep,
    first_visit_energies,
    rem_clock_record,
    rem_record_until,
)
from .experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    KSResult,
    TrialResult,
    config_from_dict,
    config_from_json,
    run_aging,
    run_bd_mixing,
    run_block_exceedance,
    run_comparison_bound,
    run_experiment,
    run_fixed_time_law,
    run_pair_counts,
    run_poisson_blocks,
    run_resample_exceedance,
    run_sa_constants,
    run_sup_distance,
    write_outputs,
)
from .report import load_results, render_figures, report, summarize

__all__ = [
    "__version__",
    # scales
    "ModelParams",
    "DerivedScales",
    "derive_scales",
    "params_from_dict",
    "params_from_json",
    "threshold_level",
    "power_normalize",
    # walk
    "SpinConfig",
    "Trajectory",
    "srw_trajectory",
    "bd_step_distribution",
    "bd_distribution",
    "stationary_log_weight",
    "pair_distance_histogram",
    "pair_distance_counts",
    # hamiltonian
    "CouplingTensor",
    "EnergyState",
    "sample_disorder",
    "energy",
    "kernel",
    "flip_update",
    "trajectory_energy_samples",
    "conditional_energy_samples",
    "conditional_energy_sequence",
    "rem_energy_sequence",
    # dynamics
    "ArrayEnergySource",
    "DisorderTrajectorySource",
    "ConditionalTrajectorySource",
    "RemTrajectorySource",
    "ClockRecord",
    "SteppedPath",
    "build_clock_record",
    "run_rht",
    "rescaled_path",
    "coarse_grain",
    "clock_inverse",
    "aging_indicator",
    "sup_power_distance",
    "default_horizon",
    # blockgauss
    "BlockSpec",
    "sample_blocks",
    "resample_mask",
    "block_maxima",
    "block_max_exceedance",
    "resampled_max_exceedance",
    "prop2_functional",
    "exceedance_sweep",
    "normal_comparison_bound",
    "deep_block_process",
    # limits
    "ExtremalLaw",
    "law_from_scales",
    "fixed_time_cdf",
    "fdd_cdf",
    "sample_extremal_path",
    "range_gap_probability",
    "aging_function",
    "SAParams",
    "sa_mgf",
    "sa_p_infinite",
    "sa_expected_finite",
    "sa_error_budget",
    "mc_first_passage",
    "k2_constant",
    # stats
    "KSReport",
    "empirical_cdf",
    "kolmogorov_sf",
    "ks_statistic",
    "ks_two_sample",
    "wilson_interval",
    # seeding
    "stream_seed",
    "stream_rng",
    # engines
    "SKLockstep",
    "CrossingBatch",
    "first_visit_energies",
    "rem_clock_record",
    "rem_record_until",
    # experiments
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
    # report
    "load_results",
    "summarize",
    "render_figures",
    "report",
]
