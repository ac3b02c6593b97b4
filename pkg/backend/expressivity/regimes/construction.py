"""
Scalar (one-dimensional) critical-point analysis.

For a scalar layer ``h -> eps h + delta tanh(W h + b)`` the derivative is
``eps + delta W tanh'(W h + b)``. It vanishes at a chosen point iff
``W <= -1/alpha`` and ``tanh'(W h + b) = -1/(alpha W)``, which fixes b up to
the sign of the pre-activation.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from utils.core.exceptions import DimensionError, NumericalError, ValidationError
from utils.core.logging import get_project_logger
from ..models import Activation, AffineSigmaMap, ResidualLayer, ResNetModel, forward

logger = get_project_logger(__name__)

CONSTRUCTION_TOLERANCE = 1e-12


@dataclass(frozen=True)
class CriticalConstruction:
    """Layer parameters that place a critical point at ``target_x``."""

    layer_index: int
    alpha: float
    W: float
    b_plus: float
    b_minus: float
    target_x: float
    h_prev: float

    def bias(self, sign: int = 1) -> float:
        return self.b_plus if sign >= 0 else self.b_minus


def construct_critical_point(
    alpha: float,
    W: float,
    target_x: float,
    prefix: Optional[ResNetModel] = None,
) -> CriticalConstruction:
    """
    Solve ``1/alpha + W tanh'(W h_{l-1}(x) + b) = 0`` for b.

    Args:
        alpha (float): Channel ratio delta/eps > 0
        W (float): Inner weight of the new layer, must satisfy W <= -1/alpha
        target_x (float): Input where the critical point is placed
        prefix (Optional[ResNetModel]): Scalar model whose layers precede the new
            one; without it h_0(x) = x

    Returns:
        CriticalConstruction: Both bias roots

    Raises:
        ValidationError: If no bias can make the layer derivative vanish
    """
    if not alpha > 0:
        raise ValidationError(f"alpha must be positive, got {alpha}", error_code="BAD_ALPHA")
    if W > -1.0 / alpha:
        raise ValidationError(
            f"No critical point possible: W={W} > -1/alpha={-1.0 / alpha}",
            error_code="NO_CRITICAL_SOLUTION",
            details={"alpha": alpha, "W": W},
        )
    if prefix is None:
        h_prev, layer_index = float(target_x), 1
    else:
        if (prefix.n_in, prefix.n_hid) != (1, 1):
            raise DimensionError("Prefix model must be scalar", error_code="NOT_SCALAR_MODEL")
        _, trace = forward(prefix, [target_x])
        h_prev, layer_index = float(trace.states[-1][0]), prefix.depth + 1

    v = -1.0 / (alpha * W)
    # v may overshoot 1 by rounding when W == -1/alpha
    y = float(Activation.TANH.inverse_derivative(min(v, 1.0)))
    construction = CriticalConstruction(
        layer_index=layer_index,
        alpha=float(alpha),
        W=float(W),
        b_plus=y - W * h_prev,
        b_minus=-y - W * h_prev,
        target_x=float(target_x),
        h_prev=h_prev,
    )
    for b in (construction.b_plus, construction.b_minus):
        residual = abs(1.0 + alpha * W * float(Activation.TANH.derivative(W * h_prev + b)))
        if residual > CONSTRUCTION_TOLERANCE * max(1.0, abs(alpha * W)):
            raise NumericalError("Constructed layer derivative does not vanish", error_code="CONSTRUCTION_FAILED",
                                 details={"residual": residual, "b": b})
    logger.debug(f"Critical construction at x={target_x}: b+={construction.b_plus:.6g}, b-={construction.b_minus:.6g}")
    return construction


def assemble_critical_model(
    construction: CriticalConstruction,
    eps: float = 1.0,
    sign: int = 1,
    prefix: Optional[ResNetModel] = None,
) -> ResNetModel:
    """
    Scalar model ending in the constructed layer ``eps h + delta tanh(W h + b)``.

    ``delta = alpha * eps``; without ``prefix`` the input and output maps are
    identities, otherwise the prefix's maps and layers are reused.
    """
    delta = construction.alpha * eps
    layer = ResidualLayer(W=[[construction.W]], W_tilde=[[1.0]], b=[construction.bias(sign)], b_tilde=[0.0])
    if prefix is None:
        return ResNetModel(eps=eps, delta=delta, input_map=AffineSigmaMap.identity(1), layers=(layer,),
                           output_map=AffineSigmaMap.identity(1))
    if not np.isclose(prefix.eps, eps) or not np.isclose(prefix.delta, delta):
        raise ValidationError("Prefix channel parameters differ from the construction",
                              error_code="PREFIX_MISMATCH",
                              details={"prefix": [prefix.eps, prefix.delta], "requested": [eps, delta]})
    return ResNetModel(eps=prefix.eps, delta=prefix.delta, input_map=prefix.input_map,
                       layers=prefix.layers + (layer,), output_map=prefix.output_map)


@dataclass(frozen=True)
class OneLayerExclusion:
    """Scalar one-layer verdict for ``eps h + delta W~ tanh(W h + b)``."""

    product: float
    no_critical_point: bool
    reason: str
    critical_preactivation: Optional[float]


def one_layer_exclusion(alpha: float, W_tilde: float, W: float, omega_inf: float, beta_inf: float) -> OneLayerExclusion:
    """
    Exact exclusion analysis of a single scalar residual layer on inputs |x| <= 1.

    The derivative is proportional to ``1/alpha + W~ W tanh'(W x + b)``:

    - ``W~ W > -1/alpha``: never zero.
    - ``W~ W < -1/(alpha k)`` with ``k = tanh'(omega_inf + beta_inf)``: negative on
      the whole domain.
    - otherwise a zero exists where ``tanh'(a) = -1/(alpha W~ W)``, reported as
      ``critical_preactivation`` (the non-negative root).
    """
    if not alpha > 0:
        raise ValidationError(f"alpha must be positive, got {alpha}", error_code="BAD_ALPHA")
    product = float(W_tilde * W)
    if product > -1.0 / alpha:
        return OneLayerExclusion(product, True, "product_above_minus_inverse_alpha", None)
    k = float(Activation.TANH.min_derivative_on(omega_inf + beta_inf))
    if k > 0 and product < -1.0 / (alpha * k):
        return OneLayerExclusion(product, True, "derivative_bound_on_domain", None)
    a_star = float(Activation.TANH.inverse_derivative(min(-1.0 / (alpha * product), 1.0)))
    return OneLayerExclusion(product, False, "critical_point_possible", a_star)
