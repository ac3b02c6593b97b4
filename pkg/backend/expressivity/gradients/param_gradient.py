"""
Reverse-mode parameter gradients for training.

Losses are means over the batch. ``bce`` works on the logit of a probability
head ``sigmoid(W h + b)`` (outer weights fixed to 1 and 0), so that
``dL/dz = (p - y) / N``.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from utils.core.exceptions import ConfigurationError, DimensionError, ValidationError
from ..models import Activation, AffineSigmaMap, PreactivationNormalizer, ResNetModel, forward_batch

LOSSES = ("mse", "bce")


@dataclass
class ParamGradient:
    """Mean loss on the batch and its gradient for every flat parameter key."""

    loss: float
    grads: Dict[str, np.ndarray]
    normalizer_grads: List[Dict[str, np.ndarray]] = field(default_factory=list)


def has_probability_head(model: ResNetModel) -> bool:
    out = model.output_map
    return (
        out.act == Activation.SIGMOID
        and not out.affine_only
        and out.W_tilde.shape == (1, 1)
        and out.W_tilde[0, 0] == 1.0
        and out.b_tilde[0] == 0.0
    )


def _as_targets(model: ResNetModel, targets, n: int) -> np.ndarray:
    T = np.asarray(targets, dtype=np.float64)
    if T.ndim == 1:
        T = T[:, None]
    if T.shape != (n, model.n_out):
        raise DimensionError(f"Targets have shape {T.shape}, expected ({n}, {model.n_out})",
                             error_code="SHAPE_MISMATCH")
    return T


def _map_backward(block: AffineSigmaMap, X_in, pre, inner, d_out, prefix: str, grads: Dict[str, np.ndarray]):
    grads[f"{prefix}.W_tilde"] = d_out.T @ inner
    grads[f"{prefix}.b_tilde"] = d_out.sum(axis=0)
    d_pre = (d_out @ block.W_tilde) * block.inner_derivative(pre)
    grads[f"{prefix}.W"] = d_pre.T @ X_in
    grads[f"{prefix}.b"] = d_pre.sum(axis=0)
    return d_pre @ block.W


def loss_value(model: ResNetModel, X, targets, loss: str = "mse") -> float:
    """Mean loss without gradients."""
    return param_gradient(model, X, targets, loss=loss, compute_grads=False).loss


def param_gradient(
    model: ResNetModel,
    X,
    targets,
    loss: str = "mse",
    normalizers: Optional[Sequence[PreactivationNormalizer]] = None,
    training: bool = True,
    compute_grads: bool = True,
) -> ParamGradient:
    """
    Exact gradient of the mean batch loss with respect to every W, W~, b, b~.

    Args:
        model (ResNetModel): The network
        X: Batch inputs, shape (N, n_in)
        targets: Batch targets, shape (N,) or (N, n_out); in [0, 1] for bce
        loss (str): ``mse`` or ``bce``
        normalizers: Optional per-layer pre-activation normalizers (batch norm)
        training (bool): Passed to the normalizers

    Returns:
        ParamGradient: Loss value, parameter gradients keyed like ``model.parameters()``

    Raises:
        ConfigurationError: If bce is requested without a probability head
    """
    if loss not in LOSSES:
        raise ValidationError(f"Unknown loss '{loss}'", error_code="BAD_LOSS", details={"allowed": list(LOSSES)})
    if loss == "bce" and not has_probability_head(model):
        raise ConfigurationError("bce loss needs a scalar sigmoid output head", error_code="BCE_NEEDS_SIGMOID")

    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValidationError("Empty batch", error_code="EMPTY_BATCH")
    Y, trace = forward_batch(model, X, normalizers=normalizers, training=training)
    n = X.shape[0]
    T = _as_targets(model, targets, n)

    if loss == "mse":
        residual = Y - T
        value = float(np.mean(residual ** 2))
    else:
        if np.any((T < 0) | (T > 1)):
            raise ValidationError("bce targets must lie in [0, 1]", error_code="BAD_TARGET")
        z = trace.output_pre
        value = float(np.mean(np.logaddexp(0.0, z) - T * z))

    if not compute_grads:
        return ParamGradient(loss=value, grads={})

    grads: Dict[str, np.ndarray] = {}
    out = model.output_map
    h_last = trace.states[-1]
    if loss == "mse":
        d_y = 2.0 * residual / residual.size
        dh = _map_backward(out, h_last, trace.output_pre, trace.output_inner, d_y, "output", grads)
    else:
        d_z = (Y - T) / n
        grads["output.W_tilde"] = np.zeros_like(out.W_tilde)
        grads["output.b_tilde"] = np.zeros_like(out.b_tilde)
        grads["output.W"] = d_z.T @ h_last
        grads["output.b"] = d_z.sum(axis=0)
        dh = d_z @ out.W

    normalizer_grads: List[Dict[str, np.ndarray]] = [{} for _ in model.layers]
    for index in range(model.depth - 1, -1, -1):
        layer = model.layers[index]
        h_prev = trace.states[index]
        s = trace.sigmas[index]
        d_r = model.delta * dh
        grads[f"layers.{index}.W_tilde"] = d_r.T @ s
        grads[f"layers.{index}.b_tilde"] = d_r.sum(axis=0)
        d_z = (d_r @ layer.W_tilde) * layer.act.derivative_from_value(s)
        if normalizers is not None:
            d_a, normalizer_grads[index] = normalizers[index].backward(d_z, trace.norm_caches[index])
        else:
            d_a = d_z
        grads[f"layers.{index}.W"] = d_a.T @ h_prev
        grads[f"layers.{index}.b"] = d_a.sum(axis=0)
        dh = model.eps * dh + d_a @ layer.W

    _map_backward(model.input_map, trace.inputs, trace.input_pre, trace.input_inner, dh, "input", grads)
    return ParamGradient(loss=value, grads=grads, normalizer_grads=normalizer_grads if normalizers else [])
