"""
Regime constants of canonical ResNets.

nu_max / nu_min bound the singular values of the products W_l W~_l; k_sigma is
a certified lower bound of sigma' on every pre-activation the domain can
produce. Certification propagates a hidden-state bound H layer by layer:

    eps < 1:   H = S_lambda + delta * S_f / (1 - eps)       (uniform in l)
    eps >= 1:  H_l = eps * H_{l-1} + delta * (||W~_l|| S_sigma + ||b~_l||)

and then A_l = ||W_l|| H_{l-1} + ||b_l|| bounds |a_l|_inf.
"""

from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from utils.core.exceptions import ValidationError
from utils.core.logging import get_project_logger
from ..models import Activation, ResNetModel, forward_batch
from ..numerics import Box, inf_norm_mat, inf_norm_vec, spectral_summary

logger = get_project_logger(__name__)

# Lattice used for the (uncertified) empirical k_sigma
EMPIRICAL_POINTS_PER_AXIS = 21
EMPIRICAL_MAX_POINTS = 10_000


class RegimeConstants(BaseModel):
    """Constants entering the two exclusion thresholds."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    K_sigma: float = Field(..., description="Global bound of sigma'")
    S_sigma: float = Field(..., description="Global bound of |sigma|")
    k_sigma: float = Field(..., ge=0, description="Certified lower bound of sigma' on the domain")
    k_sigma_empirical: Optional[float] = Field(None, description="Sampled minimum of sigma' (never certifies)")
    nu_max: float = Field(..., ge=0)
    nu_min: float = Field(..., ge=0)
    omega_inf: float = Field(..., ge=0, description="max_l ||W_l||_inf")
    omega_tilde_inf: float = Field(..., ge=0, description="max_l ||W~_l||_inf")
    beta_inf: float = Field(..., ge=0, description="max_l ||b_l||_inf")
    beta_tilde_inf: float = Field(..., ge=0, description="max_l ||b~_l||_inf")
    alpha: float = Field(..., ge=0, description="delta / eps (inf for eps = 0)")
    hidden_bounds: List[float] = Field(default_factory=list, description="H_0 .. H_L")
    preact_bounds: List[float] = Field(default_factory=list, description="A_1 .. A_L")
    inner_widths: List[int] = Field(default_factory=list, description="m_l per layer")


def channel_ratio(model: ResNetModel) -> float:
    if model.eps == 0:
        return float("inf")
    return model.delta / model.eps


def hidden_state_bounds(model: ResNetModel, domain: Box) -> List[float]:
    """Certified bounds H_0 .. H_L of ||h_l||_inf for inputs in ``domain``."""
    if domain.dim != model.n_in:
        raise ValidationError(f"Domain is {domain.dim}-D, model input is {model.n_in}-D",
                              error_code="SHAPE_MISMATCH")
    h0 = model.input_map.sup_norm_on(domain.lo, domain.hi)
    if not np.isfinite(h0):
        raise ValidationError("Input map is unbounded on the domain", error_code="UNBOUNDED_DOMAIN")
    bounds = [h0]
    if model.eps < 1.0 and model.depth > 0:
        s_f = max(layer.sup_norm() for layer in model.layers)
        uniform = h0 + model.delta * s_f / (1.0 - model.eps)
        bounds.extend([uniform] * model.depth)
        return bounds
    for layer in model.layers:
        bounds.append(model.eps * bounds[-1] + model.delta * layer.sup_norm())
    return bounds


def _empirical_min_derivative(model: ResNetModel, domain: Box, points: Optional[np.ndarray]) -> Optional[float]:
    if model.depth == 0:
        return None
    if points is None:
        per_axis = EMPIRICAL_POINTS_PER_AXIS
        while per_axis > 2 and per_axis ** domain.dim > EMPIRICAL_MAX_POINTS:
            per_axis -= 1
        points = domain.lattice(per_axis)
    _, trace = forward_batch(model, points)
    return float(min(np.min(layer.act.derivative(a)) for layer, a in zip(model.layers, trace.preacts)))


def compute_constants(model: ResNetModel, domain: Box, empirical_points: Optional[np.ndarray] = None) -> RegimeConstants:
    """
    Evaluate nu_max, nu_min, k_sigma and the max-norm weight bounds.

    Args:
        model (ResNetModel): Canonical model
        domain (Box): Bounded input domain used for k_sigma
        empirical_points (Optional[np.ndarray]): Points for the sampled k_sigma,
            defaults to a lattice on ``domain``

    Returns:
        RegimeConstants: Constants with per-layer hidden and pre-activation bounds
    """
    act = model.layers[0].act if model.layers else Activation.TANH
    hidden = hidden_state_bounds(model, domain)

    nus_max, nus_min, preacts, k_layers = [], [], [], []
    for index, layer in enumerate(model.layers):
        summary = spectral_summary(layer.W @ layer.W_tilde)
        nus_max.append(summary.sigma_max)
        nus_min.append(summary.sigma_min)
        a_bound = inf_norm_mat(layer.W) * hidden[index] + inf_norm_vec(layer.b)
        preacts.append(a_bound)
        k_layers.append(layer.act.min_derivative_on(a_bound))
        logger.debug(
            f"layer {index + 1}: sigma(W W~) in [{summary.sigma_min:.4g}, {summary.sigma_max:.4g}], "
            f"|a| <= {a_bound:.4g}, sigma' >= {k_layers[-1]:.4g}"
        )

    def layer_max(values) -> float:
        return float(max(values)) if model.layers else 0.0

    return RegimeConstants(
        K_sigma=act.K_sigma,
        S_sigma=act.S_sigma,
        k_sigma=float(min(k_layers)) if k_layers else act.K_sigma,
        k_sigma_empirical=_empirical_min_derivative(model, domain, empirical_points),
        nu_max=layer_max(nus_max),
        nu_min=float(min(nus_min)) if nus_min else 0.0,
        omega_inf=layer_max(inf_norm_mat(layer.W) for layer in model.layers),
        omega_tilde_inf=layer_max(inf_norm_mat(layer.W_tilde) for layer in model.layers),
        beta_inf=layer_max(inf_norm_vec(layer.b) for layer in model.layers),
        beta_tilde_inf=layer_max(inf_norm_vec(layer.b_tilde) for layer in model.layers),
        alpha=channel_ratio(model),
        hidden_bounds=hidden,
        preact_bounds=preacts,
        inner_widths=[layer.width for layer in model.layers],
    )
