"""Exception types shared across the package."""


class ExpSpaceError(Exception):
    """Base class for all package errors."""


class InvalidParamsError(ExpSpaceError, ValueError):
    """Space or generator parameters are out of their valid range."""


class LengthMismatchError(ExpSpaceError, ValueError):
    """A vector does not have the length required by its consumer."""


class NonFiniteError(ExpSpaceError, ValueError):
    """A computation produced or received NaN/inf values."""


class UnsupportedLayerError(ExpSpaceError, ValueError):
    """The model contains a layer kind a method cannot handle."""


class MalformedFileError(ExpSpaceError, ValueError):
    """A model or data file cannot be parsed."""


class ShapeMismatchError(ExpSpaceError, ValueError):
    """Stored parameter shapes are inconsistent with their declared layout."""


class EmptyDatasetError(ExpSpaceError, ValueError):
    """A training or evaluation set contains no samples."""


class InconsistentLengthsError(ExpSpaceError, ValueError):
    """Samples in one dataset have differing lengths."""


class RaggedRowsError(MalformedFileError):
    """Rows of a tabular data file have differing column counts."""


class EmptyFileError(MalformedFileError):
    """A data file contains no rows."""


class WindowTooLargeError(ExpSpaceError, ValueError):
    """An occlusion window exceeds the vector it slides over."""


class DegenerateRegressionError(ExpSpaceError, ValueError):
    """A surrogate regression system is singular (too few samples)."""


class AllZeroAttributionError(ExpSpaceError, ValueError):
    """An operation requires at least one nonzero attribution score."""


class TooShortError(ExpSpaceError, ValueError):
    """An attribution has fewer coordinates than the metric needs."""


class SpaceMismatchError(ExpSpaceError, ValueError):
    """An operation got a space kind it is not defined for."""


class ConfigError(ExpSpaceError, ValueError):
    """An experiment configuration is invalid."""
