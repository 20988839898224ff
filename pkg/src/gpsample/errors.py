"""Exception types raised across the package.

Each error carries a CLI exit code so the command-line driver can map
failures without a lookup table scattered through the code.
"""


class GPSampleError(Exception):
    """Base class for all package errors."""

    exit_code = 4


class ConfigError(GPSampleError):
    exit_code = 2


class DataError(GPSampleError):
    exit_code = 3


class NotPositiveDefinite(GPSampleError):
    """Cholesky factorization failed after the full jitter ladder."""


class DimensionMismatch(GPSampleError, ValueError):
    exit_code = 3


class FitFailed(GPSampleError):
    """Every hyperparameter restart produced a non-finite objective."""


class DegenerateVariance(GPSampleError):
    """Output variance is (numerically) zero, so Sobol' indices are undefined."""


class InvalidDistribution(GPSampleError, ValueError):
    exit_code = 2


class NoFeasiblePoint(GPSampleError):
    pass


class IterationFailed(GPSampleError):
    pass


class EmptyCandidates(GPSampleError):
    pass


class EmptyData(DataError):
    pass


class SingularStiffness(GPSampleError):
    pass
