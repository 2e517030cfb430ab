"""Pseudo-spectral forced SQG on the 2-torus, with linear-instability and
Hoelder-regularity diagnostics."""

from .multipliers import (
    FractionalLaplacian,
    Identity,
    InverseFractionalLaplacian,
    InverseLog,
    Inviscid,
    LogSupercritical,
    MeanZeroError,
    Multiplier,
)
from .spectral import GridSpec, SpectralField, VelocityField, apply_multiplier, norm, random_field

__version__ = "0.1.0"

__all__ = [
    "FractionalLaplacian",
    "GridSpec",
    "Identity",
    "InverseFractionalLaplacian",
    "InverseLog",
    "Inviscid",
    "LogSupercritical",
    "MeanZeroError",
    "Multiplier",
    "SpectralField",
    "VelocityField",
    "apply_multiplier",
    "norm",
    "random_field",
]
