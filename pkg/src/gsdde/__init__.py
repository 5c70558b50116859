"""Worst-case moments and practical stability for stochastic delay systems.

The package simulates stochastic differential delay equations (and their
delay-free auxiliaries) driven by noise whose volatility is only known to
lie in an interval, estimates p-th moments under the induced worst-case
expectation, evaluates closed-form moment and discretization-gap bounds,
transfers practical exponential stability between the four related
systems (delay/delay-free, exact/discretized), and fits stability
envelopes to empirical moment curves.  The ``gsdde`` command line exposes
the pipelines; see :mod:`gsdde.harness`.
"""

from ._version import __version__
from .model import (
    CoefficientError,
    CoefficientSystem,
    DelayGrid,
    GParams,
    H1Report,
    InitialSegment,
    LinearSystem,
    g_function,
    segment_norm,
    validate_h1,
)
from .scenarios import (
    CONTROL_KINDS,
    NoiseScenario,
    VolatilityControl,
    constant_control,
    load_increments,
    make_scenario_family,
    refine,
    sample_increments,
    save_increments,
)
from .integrators import (
    EXPLOSION_CAP,
    TRAJECTORY_KINDS,
    IntegrationError,
    Trajectory,
    em_sdde,
    em_sde,
    flow_restart,
    integrate_paths,
    reference_solution,
)
from .sublinear import (
    MomentCurve,
    PathEnsemble,
    delay_difference_curve,
    gap_curve,
    moment_curve,
    simulate_ensemble,
    upper_expectation,
    upper_expectation_detail,
    write_curve_csv,
)
from .certify import (
    GAP_MODES,
    GLOSSARY,
    PARAM_KINDS,
    CertReport,
    DelayDiffConstants,
    StabilityParams,
    bdg_constant,
    delay_diff_bound,
    delay_diff_constants,
    em_onestep_constant_sde,
    gap_bound,
    lemma_bound_sdde,
    lemma_bound_sde,
    odd_moment_constant,
    transfer_chain,
    transfer_emsde_to_emsdde,
    transfer_emsdde_to_sdde,
    transfer_sde_to_emsde,
    transfer_sdde_to_sde,
)
from .detect import (
    FITTED_VERDICT,
    NO_DECAY_VERDICT,
    FitConfig,
    FitResult,
    fit_practical_stability,
    verify_envelope,
)
from .config import (
    ENV_PREFIX,
    PIPELINES,
    ConfigError,
    ExperimentConfig,
    env_overrides,
)
from .harness import RunResult, run, write_outputs

__all__ = [
    "__version__",
    # model
    "CoefficientError",
    "CoefficientSystem",
    "DelayGrid",
    "GParams",
    "H1Report",
    "InitialSegment",
    "LinearSystem",
    "g_function",
    "segment_norm",
    "validate_h1",
    # scenarios
    "CONTROL_KINDS",
    "NoiseScenario",
    "VolatilityControl",
    "constant_control",
    "load_increments",
    "make_scenario_family",
    "refine",
    "sample_increments",
    "save_increments",
    # integrators
    "EXPLOSION_CAP",
    "TRAJECTORY_KINDS",
    "IntegrationError",
    "Trajectory",
    "em_sdde",
    "em_sde",
    "flow_restart",
    "integrate_paths",
    "reference_solution",
    # sublinear estimation
    "MomentCurve",
    "PathEnsemble",
    "delay_difference_curve",
    "gap_curve",
    "moment_curve",
    "simulate_ensemble",
    "upper_expectation",
    "upper_expectation_detail",
    "write_curve_csv",
    # certificates
    "GAP_MODES",
    "GLOSSARY",
    "PARAM_KINDS",
    "CertReport",
    "DelayDiffConstants",
    "StabilityParams",
    "bdg_constant",
    "delay_diff_bound",
    "delay_diff_constants",
    "em_onestep_constant_sde",
    "gap_bound",
    "lemma_bound_sdde",
    "lemma_bound_sde",
    "odd_moment_constant",
    "transfer_chain",
    "transfer_emsde_to_emsdde",
    "transfer_emsdde_to_sdde",
    "transfer_sde_to_emsde",
    "transfer_sdde_to_sde",
    # envelope fitting
    "FITTED_VERDICT",
    "NO_DECAY_VERDICT",
    "FitConfig",
    "FitResult",
    "fit_practical_stability",
    "verify_envelope",
    # configuration and pipelines
    "ENV_PREFIX",
    "PIPELINES",
    "ConfigError",
    "ExperimentConfig",
    "env_overrides",
    "RunResult",
    "run",
    "write_outputs",
]
