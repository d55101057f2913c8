"""Simulation and analysis of GHz-range AC magnetometry with concatenated
continuous dynamical decoupling on an inhomogeneous spin ensemble."""

from nvccdd.errors import InvalidParameterError, NumericalError
from nvccdd.spin import (
    DriveConfig,
    PauliCoefficients,
    SpinState,
    SystemParams,
    TargetSignal,
    population,
    propagate_lab,
    propagate_rwa,
    su2_step,
)

__version__ = "0.1.0"

__all__ = [
    "DriveConfig",
    "InvalidParameterError",
    "NumericalError",
    "PauliCoefficients",
    "SpinState",
    "SystemParams",
    "TargetSignal",
    "population",
    "propagate_lab",
    "propagate_rwa",
    "su2_step",
]
