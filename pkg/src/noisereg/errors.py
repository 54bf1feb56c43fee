"""Exception types shared across the toolkit.

Every error raised by public operations derives from NoiseRegError so
callers can catch toolkit failures in one clause. The CLI maps
ConfigError/ParameterError to exit code 2 and DivergenceError to 3.
"""


class NoiseRegError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(NoiseRegError):
    """Array shapes or class counts do not line up."""


class NumericOverflowError(NoiseRegError):
    """A computation produced NaN or Inf."""


class DivergenceError(NumericOverflowError):
    """Training loss became non-finite; the run was aborted."""


class LabelError(NoiseRegError):
    """A class label is outside [0, K)."""


class ParameterError(NoiseRegError):
    """A scalar argument is outside its valid range."""


class StateError(NoiseRegError):
    """An operation was called with stale or missing retained state."""


class DegenerateGeometryError(NoiseRegError):
    """A distance-based estimator hit a duplicate point (zero distance)."""


class InfiniteLidError(NoiseRegError):
    """All k nearest-neighbor distances are equal; the LID estimate diverges."""


class GenerationError(NoiseRegError):
    """A synthetic dataset could not be constructed as requested."""


class UndefinedMetricError(NoiseRegError):
    """A metric has an empty selection and no defined value."""


class FormatError(NoiseRegError):
    """A file does not conform to its container format."""


class ConfigError(NoiseRegError):
    """An experiment configuration is malformed or inconsistent."""
