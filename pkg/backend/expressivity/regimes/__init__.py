"""
Regime constants, critical-point exclusion verdicts and constructive embeddings
"""

from .constants import RegimeConstants, channel_ratio, compute_constants, hidden_state_bounds
from .verdict import (
    FullRankCheck,
    RegimeReport,
    Verdict,
    check_full_rank_maps,
    classify_regime,
    pointwise_full_rank_check,
)
from .construction import (
    CriticalConstruction,
    OneLayerExclusion,
    assemble_critical_model,
    construct_critical_point,
    one_layer_exclusion,
)

__all__ = [
    "RegimeConstants",
    "channel_ratio",
    "compute_constants",
    "hidden_state_bounds",
    "FullRankCheck",
    "RegimeReport",
    "Verdict",
    "check_full_rank_maps",
    "classify_regime",
    "pointwise_full_rank_check",
    "CriticalConstruction",
    "OneLayerExclusion",
    "assemble_critical_model",
    "construct_critical_point",
    "one_layer_exclusion",
]
