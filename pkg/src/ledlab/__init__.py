"""Numerical laboratory for local energy decay of wave operators on asymptotically flat backgrounds."""

from .errors import *  # noqa: F401,F403
from .model import (  # noqa: F401
    AFModel,
    CoefficientField,
    FrequencyEnvelope,
    Kind,
    MINKOWSKI,
    TrappingReport,
    af_norm,
    slow_variation,
    symmetry_defect,
    trapping_time,
)

__version__ = "0.1.0"
