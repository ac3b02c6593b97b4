"""
Unified exception handling module

This module defines all custom exception classes used in the project
to ensure consistency in exception handling. Every class carries an
``exit_code`` consumed by the command-line layer.
"""

from typing import Optional, Dict, Any


class ResNetLabException(Exception):
    """Base exception class for the project"""

    exit_code: int = 1

    def __init__(self, message: str, error_code: Optional[str] = None, details: Optional[Dict[str, Any]] = None):
        self.message = message
        self.error_code = error_code
        self.details = details or {}
        super().__init__(self.message)

    def __str__(self) -> str:
        if self.error_code:
            return f"[{self.error_code}] {self.message}"
        return self.message


class ValidationError(ResNetLabException):
    """Invalid arguments or data"""

    exit_code = 2


class DimensionError(ValidationError):
    """Shape or dimension mismatch"""
    pass


class ConfigurationError(ResNetLabException):
    """Configuration related exceptions"""

    exit_code = 2


class NumericalError(ResNetLabException):
    """Non-finite values or non-convergence"""

    exit_code = 4


class InvalidStateError(ResNetLabException):
    """Operation called on an object in the wrong state"""

    exit_code = 4


class PropertyViolation(ResNetLabException):
    """A certified bound or verdict was contradicted by measurement"""

    exit_code = 3


class VerdictInapplicableError(ResNetLabException):
    """Regime verdicts do not apply to augmented architectures"""

    exit_code = 5
