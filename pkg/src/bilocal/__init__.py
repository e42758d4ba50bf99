"""Bilocality and CHSH analysis of a two-source entanglement-swapping network."""

from .network import (
    BilocalResult,
    NetworkConfig,
    ProbabilityTable,
    b13,
    b13_closed_form,
    chsh_closed_form,
    chsh_from_model,
    correlator,
    correlator_from_table,
    deterministic_strategy_max,
    joint_probability,
    noise_sweep,
    threshold_visibility,
)
from .observables import BsmOutcome, MeasurementSetting
from .states import BellKind, SourceNoise

__version__ = "0.1.0"

__all__ = [
    "BellKind",
    "BilocalResult",
    "BsmOutcome",
    "MeasurementSetting",
    "NetworkConfig",
    "ProbabilityTable",
    "SourceNoise",
    "b13",
    "b13_closed_form",
    "chsh_closed_form",
    "chsh_from_model",
    "correlator",
    "correlator_from_table",
    "deterministic_strategy_max",
    "joint_probability",
    "noise_sweep",
    "threshold_visibility",
]
