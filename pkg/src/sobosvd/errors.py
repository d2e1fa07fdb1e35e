"""Exception types raised by this package."""


class SobosvdError(Exception):
    """Base class for all errors raised by sobosvd."""


class InvalidAxisError(SobosvdError, ValueError):
    """Axis construction rejected (too few nodes, empty interval)."""


class SamplingError(SobosvdError, ValueError):
    """A sampled value was not finite."""


class AxisMismatchError(SobosvdError, ValueError):
    """Two grid functions do not live on the same axes."""


class ModeError(SobosvdError, IndexError):
    """Mode index out of range, duplicated, or an invalid mode subset."""


class DegenerateModeError(SobosvdError, ValueError):
    """Operation on a singular direction with zero singular value."""


class InsufficientRankError(SobosvdError, ValueError):
    """Numerical rank too small for the requested diagnostic."""


class DegenerateDataError(SobosvdError, ValueError):
    """Not enough usable data points for a fit."""


class UnknownCaseError(SobosvdError, KeyError):
    """Requested analytic case is not in the catalog."""


class ConfigError(SobosvdError, ValueError):
    """Experiment configuration failed to parse or validate."""


class SampleFileError(SobosvdError, OSError):
    """Raw sample file unreadable or inconsistent with its metadata."""
