"""Exact finite-time laws and first-exit times of Lindley processes with Laplace increments."""

from .core import (
    ExpPolySegment,
    FetDistribution,
    FetPmf,
    LaplaceParams,
    MixedDensity,
    ProcessConfig,
    RegimeTag,
    dispatch_fet_regime,
    dispatch_position_regime,
    evaluate_mixed_density,
)

__version__ = "0.1.0"

__all__ = [
    "ExpPolySegment",
    "FetDistribution",
    "FetPmf",
    "LaplaceParams",
    "MixedDensity",
    "ProcessConfig",
    "RegimeTag",
    "dispatch_fet_regime",
    "dispatch_position_regime",
    "evaluate_mixed_density",
]
