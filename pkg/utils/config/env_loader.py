"""
Environment configuration loading module

Loads the project ``.env`` (or the file named by RESNETLAB_ENV_FILE) into
the process environment before settings are read.
"""

import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

from ..core.logging import get_project_logger

logger = get_project_logger(__name__)


def get_project_root() -> Path:
    """Get project root directory"""
    return Path(__file__).parent.parent.parent


def resolve_env_path(env_file: Optional[str] = None) -> Path:
    """Explicit argument, then RESNETLAB_ENV_FILE, then ``<root>/.env``; relative paths hang off the root."""
    name = env_file or os.getenv("RESNETLAB_ENV_FILE") or ".env"
    path = Path(name)
    return path if path.is_absolute() else get_project_root() / path


def load_env(env_file: Optional[str] = None) -> bool:
    """
    Load environment variables file

    Args:
        env_file: Environment file, see ``resolve_env_path``

    Returns:
        bool: Whether a file was loaded

    Note:
        Variables already present in the process environment win over the file.
    """
    env_path = resolve_env_path(env_file)
    if not env_path.exists():
        logger.debug(f"No environment file at {env_path}, using process environment")
        return False

    try:
        load_dotenv(env_path, override=False)
    except (OSError, UnicodeDecodeError) as e:
        logger.error(f"Failed to load environment file {env_path}: {e}")
        return False
    logger.debug(f"Loaded environment file {env_path}")
    return True
