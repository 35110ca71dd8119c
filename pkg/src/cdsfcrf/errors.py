"""Exception types shared across the package."""


class CDSFCRFError(Exception):
    """Base class for all package errors."""


class DimensionError(CDSFCRFError, ValueError):
    """Array shapes are empty or do not agree."""


class ParameterError(CDSFCRFError, ValueError):
    """A scalar parameter is outside its allowed range."""


class FormatError(CDSFCRFError, ValueError):
    """A file on disk does not match the expected layout."""


class DivergenceError(CDSFCRFError, ArithmeticError):
    """The optimizer produced a non-finite energy."""

    def __init__(self, iteration, message=None):
        self.iteration = iteration
        super().__init__(message or f"non-finite energy at iteration {iteration}")
