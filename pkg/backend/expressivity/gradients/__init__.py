"""
Input gradients, layer Jacobians and parameter gradients
"""

from .input_gradient import (
    FD_STEP,
    InputGradient,
    LayerJacobian,
    LayerwiseDerivatives,
    fd_gradient,
    input_gradient,
    input_gradient_batch,
    layer_jacobians,
    layerwise_derivatives,
)
from .param_gradient import LOSSES, ParamGradient, has_probability_head, loss_value, param_gradient

__all__ = [
    "FD_STEP",
    "InputGradient",
    "LayerJacobian",
    "LayerwiseDerivatives",
    "fd_gradient",
    "input_gradient",
    "input_gradient_batch",
    "layer_jacobians",
    "layerwise_derivatives",
    "LOSSES",
    "ParamGradient",
    "has_probability_head",
    "loss_value",
    "param_gradient",
]
