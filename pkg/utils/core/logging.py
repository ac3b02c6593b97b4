"""
Logging configuration module

All project loggers hang below one ``resnetlab`` root that is configured
once. Records carry the active command and root seed, set by the command
dispatcher through ``run_context``, so interleaved log files from parallel
sweeps can be told apart.
"""

import contextvars
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

PROJECT_ROOT = Path(__file__).parent.parent.parent
ROOT_LOGGER = "resnetlab"
DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - [%(command)s seed=%(seed)s] %(message)s"

_command = contextvars.ContextVar("resnetlab_command", default="-")
_seed = contextvars.ContextVar("resnetlab_seed", default="-")


class RunContextFilter(logging.Filter):
    """Stamp every record with the command and seed of the current run."""

    def filter(self, record: logging.LogRecord) -> bool:
        record.command = _command.get()
        record.seed = _seed.get()
        return True


@contextmanager
def run_context(command: str, seed: Optional[int]) -> Iterator[None]:
    command_token = _command.set(command)
    seed_token = _seed.set("-" if seed is None else str(seed))
    try:
        yield
    finally:
        _command.reset(command_token)
        _seed.reset(seed_token)


def _level_from_env() -> int:
    return getattr(logging, os.getenv("LOG_LEVEL", "INFO").upper(), logging.INFO)


def resolve_log_file(log_file: Optional[str] = None) -> Optional[Path]:
    """
    Explicit argument, then ``RESNETLAB_LOG_FILE``, then ``<root>/logs/resnetlab.log``.

    "0" or an empty value disables file logging and returns None.
    """
    raw = log_file if log_file is not None else os.getenv("RESNETLAB_LOG_FILE")
    if raw is None:
        return PROJECT_ROOT / "logs" / "resnetlab.log"
    raw = raw.strip()
    if raw in ("", "0"):
        return None
    path = Path(raw)
    return path if path.is_absolute() else PROJECT_ROOT / path


def setup_logger(level: Optional[int] = None, log_file: Optional[str] = None,
                 name: str = ROOT_LOGGER) -> logging.Logger:
    """
    Configure the ``resnetlab`` root logger.

    Diagnostics go to stderr; stdout is reserved for command summaries.
    Calling it again only adjusts the level.

    Args:
        level: Log level, ``LOG_LEVEL`` from the environment if None
        log_file: File receiving the same records, see ``resolve_log_file``
        name: Logger to configure

    Returns:
        logging.Logger: The configured root logger
    """
    root = logging.getLogger(name)
    root.setLevel(level if level is not None else _level_from_env())
    if root.handlers:
        return root
    root.propagate = False

    formatter = logging.Formatter(DEFAULT_FORMAT)
    context = RunContextFilter()

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    console_handler.addFilter(context)
    root.addHandler(console_handler)

    log_path = resolve_log_file(log_file)
    if log_path is not None:
        log_path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_path, encoding="utf-8")
        file_handler.setFormatter(formatter)
        file_handler.addFilter(context)
        root.addHandler(file_handler)

    return root


def get_project_logger(name: str) -> logging.Logger:
    """
    Get a logger below the ``resnetlab`` root.

    Args:
        name: Module name, usually ``__name__``

    Returns:
        logging.Logger: Child logger sharing the root handlers
    """
    setup_logger()
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")
