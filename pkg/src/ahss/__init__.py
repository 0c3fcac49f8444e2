"""Adaptive harmonic steady-state control of sinusoidal disturbances on unknown LTI plants."""

from ahss.lti_core import (
    ConfigurationError,
    ResonantEvaluationError,
    SimulationResult,
    StateSpaceModel,
    TonalDisturbance,
    ValidationError,
    is_asymptotically_stable,
    simulate,
    transfer_at,
)
from ahss.harmonic import (
    HarmonicPlantMap,
    PhasorVector,
    avg_power,
    extract,
    hss_response,
    synthesize,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "HarmonicPlantMap",
    "PhasorVector",
    "ResonantEvaluationError",
    "SimulationResult",
    "StateSpaceModel",
    "TonalDisturbance",
    "ValidationError",
    "avg_power",
    "extract",
    "hss_response",
    "is_asymptotically_stable",
    "simulate",
    "synthesize",
    "transfer_at",
]
