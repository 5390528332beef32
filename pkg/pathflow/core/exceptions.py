"""
Custom exception hierarchy for PathFlow
Three roots map onto the CLI exit codes: configuration (2), data (3), numeric (4)
"""


class PathflowException(Exception):
    """Base exception for all PathFlow-specific errors"""

    def __init__(self, message: str, details: dict = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def __str__(self):
        if self.details:
            return f"{self.message} | Details: {self.details}"
        return self.message


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

class ConfigurationError(PathflowException):
    """Raised when configuration is invalid or missing"""
    pass


# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------

class DataError(PathflowException):
    """Raised when input data cannot be used as given"""
    pass


class ManifestError(DataError):
    """Raised when a manifest row violates the manifest contract"""

    def __init__(self, message: str, row: int = None, details: dict = None):
        details = dict(details or {})
        if row is not None:
            details.setdefault("row", row)
        super().__init__(message, details)
        self.row = row


class ManifestParseError(ManifestError):
    """Raised when a manifest field cannot be parsed"""
    pass


class TaxonomyError(ManifestError):
    """Raised when codeletion status is set outside the IDH-mutant branch"""
    pass


class DecodeError(DataError):
    """Raised when an image file cannot be decoded"""
    pass


class NoTissueError(DataError):
    """Raised when a slide has no tissue-bearing positions"""
    pass


class InsufficientDataError(DataError):
    """Raised when a class has too few slides for the split protocol"""
    pass


class CutoffError(DataError):
    """Raised when the short/long survival cutoff cannot be derived"""
    pass


class UndefinedMetricError(DataError):
    """Raised when a statistic is undefined for the given cohort"""
    pass


class AggregationError(DataError):
    """Raised when patch predictions cannot be fused"""
    pass


class PatchCacheError(DataError):
    """Raised when a patch cache file is malformed"""
    pass


class ModelFileError(DataError):
    """Raised when a model file is malformed"""
    pass


class CompatibilityError(DataError):
    """Raised when a model does not fit the requested task"""
    pass


class OutputPathError(DataError):
    """Raised when an output location cannot be written"""
    pass


# ---------------------------------------------------------------------------
# Numeric
# ---------------------------------------------------------------------------

class NumericError(PathflowException):
    """Raised on numeric failures in the math core or training loop"""
    pass


class ShapeError(NumericError):
    """Raised when tensor shapes do not agree"""

    def __init__(self, message: str, layer: int = None, details: dict = None):
        details = dict(details or {})
        if layer is not None:
            details.setdefault("layer", layer)
        super().__init__(message, details)
        self.layer = layer


class BatchSizeError(ShapeError):
    """Raised when a batch is too small for the requested computation"""
    pass


class NonFiniteError(NumericError):
    """Raised when NaN/Inf values appear in activations or gradients"""

    def __init__(self, message: str, layer=None, details: dict = None):
        details = dict(details or {})
        if layer is not None:
            details.setdefault("layer", layer)
        super().__init__(message, details)
        self.layer = layer


class CoxLikelihoodError(NumericError):
    """Raised when the partial likelihood is undefined (no observed events)"""
    pass


class TrainingDivergenceError(NumericError):
    """Raised when the training loss becomes non-finite"""

    def __init__(self, message: str, epoch: int = None, batch: int = None, details: dict = None):
        details = dict(details or {})
        details.setdefault("epoch", epoch)
        details.setdefault("batch", batch)
        super().__init__(message, details)
        self.epoch = epoch
        self.batch = batch


class GradCheckFailure(NumericError):
    """Raised when a gradient check exceeds its tolerance"""
    pass
