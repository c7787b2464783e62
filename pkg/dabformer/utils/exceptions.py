"""
Custom Exceptions

This module contains custom exception classes for the library and the CLI.
"""


class DabformerError(Exception):
    """Base library exception"""

    def __init__(self, message: str, exit_code: int = 2, details: str = None):
        self.message = message
        self.exit_code = exit_code
        self.details = details
        super().__init__(self.message)

    def __str__(self) -> str:
        if self.details:
            return f"{self.message} ({self.details})"
        return self.message


class ShapeError(DabformerError, ValueError):
    """Shape or precondition error exception"""

    def __init__(self, message: str = "Shape mismatch", details: str = None):
        super().__init__(message, 2, details)


class NonFiniteError(DabformerError, FloatingPointError):
    """NaN/Inf produced by an operation"""

    def __init__(self, message: str = "Non-finite values", details: str = None, layer: str = None):
        self.layer = layer
        super().__init__(message, 3, details)


class ConfigError(DabformerError):
    """Configuration error exception"""

    def __init__(self, message: str = "Invalid configuration", details: str = None, line: int = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message, 4, details)


class CheckpointError(DabformerError):
    """Corrupt or mismatched checkpoint exception"""

    def __init__(self, message: str = "Invalid checkpoint", details: str = None):
        super().__init__(message, 5, details)


class ImageFormatError(DabformerError):
    """Unsupported or truncated image exception"""

    def __init__(self, message: str = "Unsupported image", details: str = None):
        super().__init__(message, 6, details)


class CoverageError(DabformerError):
    """Unreachable corruption coverage exception"""

    def __init__(self, message: str = "Coverage cannot be reached", details: str = None):
        super().__init__(message, 7, details)


class GradCheckError(DabformerError):
    """Gradient check could not be evaluated"""

    def __init__(self, message: str = "Gradient check failed", details: str = None):
        super().__init__(message, 8, details)
