"""
Core Utilities Module

Provides fundamental tools for the project, including:
- Exception handling
- Logging configuration
- Seed management
"""

from .exceptions import (
    ResNetLabException,
    ValidationError,
    DimensionError,
    ConfigurationError,
    NumericalError,
    InvalidStateError,
    PropertyViolation,
    VerdictInapplicableError,
)

from .logging import (
    get_project_logger,
    run_context,
)

from .seeding import make_rng, seed_sequence

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
    "run_context",
    "make_rng",
    "seed_sequence",
]
