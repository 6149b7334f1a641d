"""Three-party quantum digital signature toolkit.

Analytic security bounds, decoy-state estimation, signature-rate
optimisation and a Monte Carlo protocol simulator.
"""
from .bounds import (
    ProtocolCounts,
    RobustnessMode,
    SecurityReport,
    Source,
    Thresholds,
    compose_security,
    correlation_gap,
    forgery_probability,
    repudiation_probability,
    robustness_probability,
    solve_repudiation_root,
)
from .channel import (
    ChannelParams,
    GainTable,
    paired_decoy_gains,
    paired_photon_yields,
    shared_decoy_gains,
    shared_photon_yields,
    transmittance,
    two_photon_gains,
)
from .config import RunConfig, load_config, parse_config, serialize_config
from .decoy import (
    Observation,
    PairedDecoyConfig,
    SharedDecoyConfig,
    TwoPhotonEstimate,
    estimate_two_photon_paired,
    estimate_two_photon_shared,
    fluctuate,
    model_observations,
)
from .engine import (
    Adversary,
    MeasurementBasis,
    Polarization,
    StateSet,
    conclusive_decision,
    empirical_bound_check,
    measure,
    run_distribution,
    run_estimation,
    run_messaging,
    saturating_repudiation,
    state_sets,
)
from .entropy import (
    EncodingVariant,
    ErrorRates,
    binary_entropy,
    forger_information,
    gaussian_tail,
    inverse_binary_entropy,
    min_forgery_mismatch,
    phase_error_relation,
    sampling_correction,
    sampling_deviation,
    sampling_tail,
)
from .errors import ConvergenceError, EstimateInvalidError, InfeasibleError, QDSError
from .optimizer import (
    ProtocolConfig,
    RatePoint,
    RateTarget,
    SplitPolicy,
    evaluate_at_n,
    min_pulses,
    sweep,
    sweep_csv,
    transferability_bounds,
)

__all__ = [
    "Adversary",
    "ChannelParams",
    "ConvergenceError",
    "EncodingVariant",
    "ErrorRates",
    "EstimateInvalidError",
    "GainTable",
    "InfeasibleError",
    "MeasurementBasis",
    "Observation",
    "PairedDecoyConfig",
    "Polarization",
    "ProtocolConfig",
    "ProtocolCounts",
    "QDSError",
    "RatePoint",
    "RateTarget",
    "RobustnessMode",
    "RunConfig",
    "SecurityReport",
    "SharedDecoyConfig",
    "Source",
    "SplitPolicy",
    "StateSet",
    "Thresholds",
    "TwoPhotonEstimate",
    "binary_entropy",
    "compose_security",
    "conclusive_decision",
    "correlation_gap",
    "empirical_bound_check",
    "estimate_two_photon_paired",
    "estimate_two_photon_shared",
    "evaluate_at_n",
    "fluctuate",
    "forger_information",
    "forgery_probability",
    "gaussian_tail",
    "inverse_binary_entropy",
    "load_config",
    "measure",
    "min_forgery_mismatch",
    "min_pulses",
    "model_observations",
    "paired_decoy_gains",
    "paired_photon_yields",
    "parse_config",
    "phase_error_relation",
    "repudiation_probability",
    "robustness_probability",
    "run_distribution",
    "run_estimation",
    "run_messaging",
    "sampling_correction",
    "sampling_deviation",
    "sampling_tail",
    "saturating_repudiation",
    "serialize_config",
    "shared_decoy_gains",
    "shared_photon_yields",
    "solve_repudiation_root",
    "state_sets",
    "sweep",
    "sweep_csv",
    "transferability_bounds",
    "transmittance",
    "two_photon_gains",
]

__version__ = "0.1.0"
