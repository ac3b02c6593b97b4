"""
Input gradients of scalar ResNet outputs.

For an output row k the gradient is the transposed chain-rule product

    grad_x Phi_k(x) = [ d lambda~_k . D_L ... D_1 . d lambda ]^T,
    D_l = eps * Id + delta * W~_l sigma'(a_l) W_l.

Jacobians are kept as explicit small matrices so the rank analysis can reuse
them.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from utils.core.exceptions import DimensionError, ValidationError
from utils.core.logging import get_project_logger
from ..models import HiddenTrace, ResNetModel, evaluate, forward, forward_batch
from ..numerics import Mat64, Vec64, as_vec, ensure_finite

logger = get_project_logger(__name__)

FD_STEP = 1e-5
FD_AGREEMENT = 1e-6

ScalarEvaluator = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class LayerJacobian:
    """``D = eps * Id + delta * raw_df`` with ``raw_df = W~ sigma'(a) W``."""

    D: Mat64
    raw_df: Mat64


@dataclass(frozen=True)
class InputGradient:
    grad: Vec64
    per_layer: Tuple[LayerJacobian, ...]
    output_index: int = 0


@dataclass(frozen=True)
class LayerwiseDerivatives:
    """Scalar derivatives of lambda, of every layer map h_{l-1} -> h_l, and of lambda~."""

    input_derivative: float
    layer_derivatives: Tuple[float, ...]
    output_derivative: float

    @property
    def total(self) -> float:
        return float(self.output_derivative * np.prod(self.layer_derivatives) * self.input_derivative)


def _resolve_output_index(model: ResNetModel, output_index: Optional[int]) -> int:
    if output_index is None:
        if model.n_out != 1:
            raise ValidationError(
                f"Model has {model.n_out} outputs; select one with output_index",
                error_code="NON_SCALAR_OUTPUT",
            )
        return 0
    if not 0 <= output_index < model.n_out:
        raise ValidationError(f"output_index {output_index} out of range for {model.n_out} outputs",
                              error_code="BAD_OUTPUT_INDEX")
    return output_index


def layer_jacobians(model: ResNetModel, trace: HiddenTrace) -> Tuple[LayerJacobian, ...]:
    """Per-layer Jacobians ``D_l`` evaluated along a forward trace."""
    eye = np.eye(model.n_hid)
    jacobians = []
    for layer, a in zip(model.layers, trace.preacts):
        raw = layer.W_tilde @ (layer.act.derivative(a)[:, None] * layer.W)
        jacobians.append(LayerJacobian(D=model.eps * eye + model.delta * raw, raw_df=raw))
    return tuple(jacobians)


def input_gradient(model: ResNetModel, x: Vec64, output_index: Optional[int] = None) -> InputGradient:
    """
    Exact gradient of one output component with respect to the input.

    Args:
        model (ResNetModel): The network
        x (Vec64): Evaluation point
        output_index (Optional[int]): Output row; required when n_out > 1

    Returns:
        InputGradient: The gradient and the layer Jacobians it was built from

    Raises:
        ValidationError: If the output is not scalar and no row is selected
    """
    k = _resolve_output_index(model, output_index)
    _, trace = forward(model, x)
    per_layer = layer_jacobians(model, trace)

    row = model.output_map.jacobian(trace.states[-1])[k]
    for jac in reversed(per_layer):
        row = row @ jac.D
    grad = row @ model.input_map.jacobian(as_vec(x, "x"))
    ensure_finite(grad, "input gradient")
    return InputGradient(grad=grad, per_layer=per_layer, output_index=k)


def input_gradient_batch(model: ResNetModel, X, output_index: Optional[int] = None) -> np.ndarray:
    """Gradients for every row of ``X`` (shape (N, n_in)), via vector-Jacobian products."""
    k = _resolve_output_index(model, output_index)
    _, trace = forward_batch(model, X)
    out = model.output_map
    V = (out.W_tilde[k][None, :] * out.inner_derivative(trace.output_pre)) @ out.W
    for layer, z in zip(reversed(model.layers), reversed(trace.preacts)):
        V = model.eps * V + model.delta * (((V @ layer.W_tilde) * layer.act.derivative(z)) @ layer.W)
    inp = model.input_map
    V = ((V @ inp.W_tilde) * inp.inner_derivative(trace.input_pre)) @ inp.W
    return ensure_finite(V, "batched input gradient")


def _as_scalar_evaluator(model: Union[ResNetModel, ScalarEvaluator], output_index: Optional[int]):
    if isinstance(model, ResNetModel):
        k = _resolve_output_index(model, output_index)
        return lambda X: evaluate(model, X)[:, k]
    return lambda X: np.array([float(model(row)) for row in X])


def _central_differences(f, x: np.ndarray, h: float) -> np.ndarray:
    n = x.size
    steps = np.eye(n) * h
    values = f(np.vstack([x + steps, x - steps]))
    return (values[:n] - values[n:]) / (2.0 * h)


def fd_gradient(
    model: Union[ResNetModel, ScalarEvaluator],
    x: Vec64,
    h: float = FD_STEP,
    output_index: Optional[int] = None,
) -> Vec64:
    """
    Central finite-difference gradient, used as an oracle for ``input_gradient``.

    Evaluates at steps ``h`` and ``h/2``; if the two disagree the Richardson
    combination ``(4 g_{h/2} - g_h) / 3`` is returned instead of ``g_h``.
    ``model`` may also be any scalar callable on a 1-D array.
    """
    if not h > 0:
        raise ValidationError(f"FD step must be positive, got {h}", error_code="BAD_STEP")
    x = as_vec(x, "x")
    if isinstance(model, ResNetModel) and x.size != model.n_in:
        raise DimensionError(f"x has {x.size} entries, model expects {model.n_in}", error_code="SHAPE_MISMATCH")
    f = _as_scalar_evaluator(model, output_index)
    g_h = _central_differences(f, x, h)
    g_half = _central_differences(f, x, 0.5 * h)
    scale = max(float(np.max(np.abs(g_half))), 1e-12)
    if float(np.max(np.abs(g_h - g_half))) / scale <= FD_AGREEMENT:
        return g_h
    logger.debug(f"FD steps disagree at x={x.tolist()}, using Richardson extrapolation")
    return (4.0 * g_half - g_h) / 3.0


def layerwise_derivatives(model: ResNetModel, x: float) -> LayerwiseDerivatives:
    """
    Derivatives of the individual maps of a scalar (1-1-1) model at ``x``.

    Layer l contributes ``eps + delta * W~_l sigma'(a_l) W_l``; a zero of any of
    them makes ``x`` a critical point.
    """
    if (model.n_in, model.n_hid, model.n_out) != (1, 1, 1):
        raise DimensionError(
            "Layer-wise derivatives need n_in = n_hid = n_out = 1",
            error_code="NOT_SCALAR_MODEL",
            details={"dims": [model.n_in, model.n_hid, model.n_out]},
        )
    x_vec = as_vec([x], "x")
    _, trace = forward(model, x_vec)
    per_layer = layer_jacobians(model, trace)
    return LayerwiseDerivatives(
        input_derivative=float(model.input_map.jacobian(x_vec)[0, 0]),
        layer_derivatives=tuple(float(jac.D[0, 0]) for jac in per_layer),
        output_derivative=float(model.output_map.jacobian(trace.states[-1])[0, 0]),
    )
