"""Exception types raised across the package."""


class PhotonSplitterError(Exception):
    """Base class for all package errors."""

    code = "error"


class CutoffExceeded(PhotonSplitterError, ValueError):
    code = "cutoff_exceeded"


class DomainError(PhotonSplitterError, ValueError):
    code = "domain_error"


class ModeIndexError(PhotonSplitterError, IndexError):
    code = "mode_index_error"


class DimensionMismatch(PhotonSplitterError, ValueError):
    code = "dimension_mismatch"


class GridTooNarrow(PhotonSplitterError, ValueError):
    code = "grid_too_narrow"


class NeverClicks(PhotonSplitterError, ValueError):
    code = "never_clicks"


class SpecCountMismatch(PhotonSplitterError, ValueError):
    code = "spec_count_mismatch"


class TooFewPhases(PhotonSplitterError, ValueError):
    code = "too_few_phases"


class CutoffTooLarge(PhotonSplitterError, ValueError):
    code = "cutoff_too_large"


class ParseError(PhotonSplitterError, ValueError):
    code = "parse_error"

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(PhotonSplitterError, ValueError):
    code = "validation_error"

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class UnknownExperiment(PhotonSplitterError, KeyError):
    code = "unknown_experiment"

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class NoConvergence(UserWarning):
    """Issued when an iterative reconstruction stops at ``max_iters``."""
