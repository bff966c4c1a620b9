"""Random repeated interaction systems: RDOs, random products and ergodic averages."""

from randrep.errors import (
    BadDensity,
    ConfigError,
    DegenerateEigenvalue,
    DegenerateResonance,
    EigenvalueNotFound,
    GapTooSmall,
    GateViolation,
    NonConvergence,
    QOutOfRangeWarning,
    RandRepError,
    ThresholdViolation,
    UnsupportedDistribution,
)

__version__ = "0.1.0"
