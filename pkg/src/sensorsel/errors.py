"""Exception types shared across the package."""


class SensorSelError(Exception):
    """Base class for all sensorsel errors."""


class DuplicateSensorError(SensorSelError):
    """A sensor index appears more than once in a selection."""


class IndexOutOfRangeError(SensorSelError):
    """A sensor index lies outside [1, n]."""


class TooManySensorsError(SensorSelError):
    """More sensors requested than candidate locations available."""


class NoAdmissibleCandidateError(SensorSelError):
    """Every remaining candidate was skipped as informationally redundant."""


class InstanceTooLargeError(SensorSelError):
    """A combinatorial enumeration would exceed the safety guard."""


class SingularInformationError(SensorSelError):
    """The information (Gram) matrix is singular or too ill-conditioned."""


class EigenSolverError(SensorSelError):
    """The symmetric eigensolver failed to converge."""


class RankDeficientError(SensorSelError):
    """The measurement matrix does not have full row or column rank."""


class ZeroReferenceError(SensorSelError):
    """A relative error was requested against a zero-norm reference."""


class FormatError(SensorSelError):
    """A snapshot file is malformed or truncated."""


class DataError(SensorSelError):
    """Snapshot payload contains invalid (non-finite) values."""


class RankOutOfRangeError(SensorSelError):
    """Requested truncation rank is outside [1, min(n, m)]."""


class FoldError(SensorSelError):
    """Invalid cross-validation fold count."""


class ConfigError(SensorSelError):
    """Invalid experiment configuration."""
