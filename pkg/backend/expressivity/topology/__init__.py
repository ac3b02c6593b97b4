"""
Level-set topology on grids: components, tunnel verdicts, critical points and contours
"""

from .grid import GridDomain, ScalarField, as_scalar_field, evaluate_grid
from .components import (
    ComponentSummary,
    LevelCrossingReport,
    LevelSetReport,
    TunnelVerdict,
    UnionFind,
    certify_level_crossings,
    label_components,
    level_band,
    level_components,
    tunnel_check_1d,
    xor_tunnel_signature,
)
from .critical import (
    CRITICAL_TOLERANCE,
    CriticalSearchResult,
    critical_point_search,
    decision_boundary_level,
    threshold_accuracy,
)
from .contours import Segment, marching_squares

__all__ = [
    "GridDomain",
    "ScalarField",
    "as_scalar_field",
    "evaluate_grid",
    "ComponentSummary",
    "LevelCrossingReport",
    "LevelSetReport",
    "TunnelVerdict",
    "UnionFind",
    "certify_level_crossings",
    "label_components",
    "level_band",
    "level_components",
    "tunnel_check_1d",
    "xor_tunnel_signature",
    "CRITICAL_TOLERANCE",
    "CriticalSearchResult",
    "critical_point_search",
    "decision_boundary_level",
    "threshold_accuracy",
    "Segment",
    "marching_squares",
]
