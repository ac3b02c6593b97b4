"""
resnetlab numerical core

Library users importing ``backend.expressivity`` directly (notebooks, the
reproduction script) get the same project-root imports and RESNETLAB_*
environment as the ``resnetlab`` command.
"""

import os
import sys

_project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if _project_root not in sys.path:
    sys.path.insert(0, _project_root)

from utils.config.env_loader import load_env  # noqa: E402

load_env()

__all__ = ["expressivity"]
