"""
Configuration Management Module

Provides unified configuration management functionality, including:
- Environment variable management
- Runtime settings (thread cap, log level, output root)
"""

from .env_loader import load_env
from .settings import RuntimeSettings, get_runtime_settings

__all__ = [
    "load_env",
    "RuntimeSettings",
    "get_runtime_settings",
]
