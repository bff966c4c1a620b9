"""Exception types. `exit_code` is what the CLI returns when one escapes."""


class RandRepError(Exception):
    exit_code = 1


class NonConvergence(RandRepError):
    pass


class DegenerateEigenvalue(RandRepError):
    pass


class EigenvalueNotFound(RandRepError):
    pass


class BadDensity(RandRepError, ValueError):
    pass


class DegenerateResonance(RandRepError, ValueError):
    pass


class UnsupportedDistribution(RandRepError):
    pass


class GateViolation(RandRepError):
    exit_code = 3


class ThresholdViolation(RandRepError):
    pass


class GapTooSmall(RandRepError):
    pass


class ConfigError(RandRepError):
    exit_code = 2


class QOutOfRangeWarning(UserWarning):
    pass
