"""
Runtime settings

Process-wide knobs read from the environment (after ``load_env``).
"""

import os
from pathlib import Path

from pydantic import BaseModel, Field

from ..core.exceptions import ConfigurationError
from .env_loader import get_project_root


class RuntimeSettings(BaseModel):
    """Settings shared by every command"""

    threads: int = Field(..., ge=1, description="Upper bound on worker threads")
    log_level: str = Field("INFO", description="Logging level name")
    output_root: Path = Field(..., description="Default directory for run artifacts")


def get_runtime_settings() -> RuntimeSettings:
    """
    Build settings from RESNETLAB_THREADS, LOG_LEVEL and RESNETLAB_OUTPUT.

    Raises:
        ConfigurationError: If RESNETLAB_THREADS is not a positive integer
    """
    raw_threads = os.getenv("RESNETLAB_THREADS")
    if raw_threads is None or raw_threads.strip() == "":
        threads = os.cpu_count() or 1
    else:
        try:
            threads = int(raw_threads)
        except ValueError:
            raise ConfigurationError(
                f"RESNETLAB_THREADS must be an integer, got {raw_threads!r}",
                error_code="BAD_THREADS",
            )
        if threads < 1:
            raise ConfigurationError(
                f"RESNETLAB_THREADS must be >= 1, got {threads}", error_code="BAD_THREADS"
            )

    output_root = Path(os.getenv("RESNETLAB_OUTPUT", str(get_project_root() / "runs")))
    return RuntimeSettings(
        threads=threads,
        log_level=os.getenv("LOG_LEVEL", "INFO").upper(),
        output_root=output_root,
    )
