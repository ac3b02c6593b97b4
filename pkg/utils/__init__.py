"""
resnetlab utilities module

This package provides shared infrastructure used across the project,
with a clear modular design:
- config: Environment loading and runtime settings
- core: Core utilities (exceptions, logging, seeding)
"""

from .core.exceptions import (
    ResNetLabException,
    ValidationError,
    DimensionError,
    ConfigurationError,
    NumericalError,
    InvalidStateError,
    PropertyViolation,
    VerdictInapplicableError,
)

from .core.logging import (
    get_project_logger,
)

__version__ = "0.1.0"

__all__ = [
    "ResNetLabException",
    "ValidationError",
    "DimensionError",
    "ConfigurationError",
    "NumericalError",
    "InvalidStateError",
    "PropertyViolation",
    "VerdictInapplicableError",
    "get_project_logger",
]
