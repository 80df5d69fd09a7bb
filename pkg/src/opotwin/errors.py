"""Exception hierarchy shared across the package."""


class OpoTwinError(Exception):
    """Base class for all package errors."""


class DomainError(OpoTwinError, ValueError):
    """An input is outside the physical domain of an operation."""


class AboveThresholdError(DomainError):
    """Pump at or above threshold: the below-threshold model diverges."""


class LockProtocolError(OpoTwinError):
    """A lock controller was driven outside its protocol (e.g. disengaged)."""


class LockLostError(OpoTwinError):
    """The fundamental lock was lost during a procedure that requires it."""


class FitError(OpoTwinError):
    """A least-squares fit failed to converge or the data are unusable."""


class CalibrationError(OpoTwinError):
    """A calibration measurement is inconsistent (e.g. no shot-noise slope)."""


class InsufficientDataError(OpoTwinError):
    """A trace is too short for the requested reduction."""


class SimulationFault(OpoTwinError):
    """The virtual apparatus reached an invalid state (NaN, above threshold)."""


class ConfigError(OpoTwinError):
    """A run configuration file or value is invalid."""
