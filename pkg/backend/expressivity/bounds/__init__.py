"""
Proximity bounds (ResNet vs. neural ODE, ResNet vs. MLP) and their empirical certification
"""

from .formulas import (
    CanonicalConstants,
    EulerBoundInputs,
    MlpBoundInputs,
    euler_bound_canonical,
    euler_bound_general,
    mlp_bound_canonical_constants,
    mlp_bound_explicit,
)
from .certification import (
    CSV_COLUMNS,
    BoundReport,
    CanonicalInputs,
    canonical_inputs_for,
    certify_euler,
    certify_mlp,
    certify_mlp_crossings,
    empirical_sup_distance,
    euler_order_ratios,
    mlp_eps_spread,
    model_evaluator,
    node_evaluator,
    reports_to_frame,
)

__all__ = [
    "CanonicalConstants",
    "EulerBoundInputs",
    "MlpBoundInputs",
    "euler_bound_canonical",
    "euler_bound_general",
    "mlp_bound_canonical_constants",
    "mlp_bound_explicit",
    "CSV_COLUMNS",
    "BoundReport",
    "CanonicalInputs",
    "canonical_inputs_for",
    "certify_euler",
    "certify_mlp",
    "certify_mlp_crossings",
    "empirical_sup_distance",
    "euler_order_ratios",
    "mlp_eps_spread",
    "model_evaluator",
    "node_evaluator",
    "reports_to_frame",
]
