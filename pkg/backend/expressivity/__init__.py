"""
Narrow eps-delta ResNets: models, exact gradients, regime verdicts,
proximity bounds, level-set topology and training.
"""

from utils import __version__

__all__ = ["__version__"]
