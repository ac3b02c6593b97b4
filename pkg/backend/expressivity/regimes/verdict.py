"""
Critical-point exclusion verdicts.

A layer Jacobian D_l = eps Id + delta W~_l sigma'(a_l) W_l is singular exactly
when -1/alpha is an eigenvalue of W~_l sigma'(a_l) W_l. Eigenvalue magnitudes
are bounded above by nu_max K_sigma and (for n_hid >= m_l, non-zero spectrum)
below by nu_min k_sigma, giving two certified regions:

    alpha < 1 / (nu_max K_sigma)   no critical points (neural ODE side)
    alpha > 1 / (nu_min k_sigma)   no critical points (MLP side)
"""

from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from utils.core.exceptions import ValidationError, VerdictInapplicableError
from utils.core.logging import get_project_logger
from ..gradients import layer_jacobians
from ..models import ResNetModel, forward, forward_batch
from ..numerics import Box, singular_values, solve_det_shift
from .constants import RegimeConstants, compute_constants

logger = get_project_logger(__name__)

DET_HIT_TOLERANCE = 1e-10
RANK_TOLERANCE = 1e-12
ASSUMPTION_POINTS_PER_AXIS = 5


class Verdict(str, Enum):
    NODE_SIDE = "NoCriticalPointsNodeSide"
    MLP_SIDE = "NoCriticalPointsMlpSide"
    INDETERMINATE = "Indeterminate"


class RegimeReport(BaseModel):
    """Constants, raw exclusion flags, thresholds and the resulting verdict."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    constants: RegimeConstants
    node_side_excluded: bool
    mlp_side_excluded: bool
    verdict: Verdict
    thresholds: Tuple[float, float] = Field(..., description="(1/(nu_max K_sigma), 1/(nu_min k_sigma))")
    branch: str = Field("ratio", description="ratio | mlp_limit | skip_only | constant")
    flags: List[str] = Field(default_factory=list)

    @property
    def excluded(self) -> bool:
        return self.verdict != Verdict.INDETERMINATE


def _safe_reciprocal(value: float) -> float:
    return float("inf") if value <= 0 else 1.0 / value


def check_full_rank_maps(model: ResNetModel, domain: Box, points_per_axis: int = ASSUMPTION_POINTS_PER_AXIS) -> bool:
    """
    Sampled check that d lambda has rank n_hid and every row of d lambda~ is non-zero.

    This is a necessary-condition screen on a lattice, not a proof.
    """
    points = domain.lattice(points_per_axis)
    for jac in model.input_map.jacobian_batch(points):
        values = singular_values(jac)
        if values.size < model.n_hid or values[-1] <= RANK_TOLERANCE * max(values[0], 1.0):
            return False
    _, trace = forward_batch(model, points)
    out_jac = model.output_map.jacobian_batch(trace.states[-1])
    return bool(np.all(np.max(np.abs(out_jac), axis=2) > 0))


def classify_regime(model: ResNetModel, domain: Box, empirical_points: Optional[np.ndarray] = None) -> RegimeReport:
    """
    Certified critical-point verdict for a non-augmented canonical ResNet.

    Args:
        model (ResNetModel): The network
        domain (Box): Bounded input domain (enters k_sigma)

    Returns:
        RegimeReport: Verdict with both raw exclusion flags

    Raises:
        VerdictInapplicableError: If n_in < n_hid
    """
    if not model.non_augmented:
        raise VerdictInapplicableError(
            f"Verdicts need n_in >= n_hid, model has n_in={model.n_in}, n_hid={model.n_hid}",
            error_code="AUGMENTED_MODEL",
        )
    constants = compute_constants(model, domain, empirical_points)
    lo = _safe_reciprocal(constants.nu_max * constants.K_sigma)
    hi = _safe_reciprocal(constants.nu_min * constants.k_sigma)
    flags: List[str] = []
    if constants.nu_max == 0:
        flags.append("degenerate_residual")
    if not check_full_rank_maps(model, domain):
        flags.append("input_output_rank_deficient")
    if constants.nu_min * constants.k_sigma > constants.nu_max * constants.K_sigma:
        flags.append("thresholds_crossed")
    widths_ok = all(m <= model.n_hid for m in constants.inner_widths)

    if model.eps == 0 and model.delta == 0:
        branch, node, mlp = "constant", False, False
        flags.append("constant_map")
    elif model.delta == 0:
        # D_l = eps Id for every layer
        branch, node, mlp = "skip_only", True, False
    elif model.eps == 0:
        # D_l = delta W~ sigma' W is invertible iff the square products are
        square = all(m == model.n_hid for m in constants.inner_widths)
        branch, node, mlp = "mlp_limit", False, bool(square and constants.nu_min > 0)
    else:
        branch = "ratio"
        node = constants.alpha < lo
        mlp = constants.alpha > hi
        if mlp and not widths_ok:
            mlp = False
            flags.append("mlp_side_needs_n_hid_ge_m")

    if node:
        verdict = Verdict.NODE_SIDE
    elif mlp:
        verdict = Verdict.MLP_SIDE
    else:
        verdict = Verdict.INDETERMINATE
    if "input_output_rank_deficient" in flags and verdict != Verdict.INDETERMINATE:
        logger.warning("Input/output maps failed the sampled rank check, verdict withheld")
        verdict = Verdict.INDETERMINATE

    report = RegimeReport(constants=constants, node_side_excluded=node, mlp_side_excluded=mlp,
                          verdict=verdict, thresholds=(lo, hi), branch=branch, flags=flags)
    logger.info(f"Regime verdict {verdict.value} (alpha={constants.alpha:.4g}, thresholds=({lo:.4g}, {hi:.4g}))")
    return report


class FullRankCheck(BaseModel):
    """Per point and layer: is -1/alpha away from the spectrum, and sigma_min(D_l)."""

    full_rank: List[List[bool]]
    sigma_min_D: List[List[float]]

    @property
    def all_full_rank(self) -> bool:
        return all(all(row) for row in self.full_rank)

    def rank_deficient_layers(self, point_index: int) -> List[int]:
        return [l for l, ok in enumerate(self.full_rank[point_index]) if not ok]


def pointwise_full_rank_check(model: ResNetModel, xs: Sequence) -> FullRankCheck:
    """
    Test every layer Jacobian along the forward trace of each point.

    A layer counts as singular when ``|det(raw_df + Id/alpha)|`` is at most
    ``1e-10 * sigma_max(raw_df + Id/alpha)^n_hid``.
    """
    if model.eps <= 0 or model.delta <= 0:
        raise ValidationError("Pointwise rank check needs eps > 0 and delta > 0", error_code="BAD_CHANNEL_PARAMETER")
    shift = model.eps / model.delta
    n = model.n_hid
    full_rank, sigma_min_d = [], []
    for x in xs:
        _, trace = forward(model, x)
        row_ok, row_sigma = [], []
        for jac in layer_jacobians(model, trace):
            shifted = jac.raw_df + shift * np.eye(n)
            scale = singular_values(shifted)[0] ** n
            row_ok.append(solve_det_shift(jac.raw_df, shift) > DET_HIT_TOLERANCE * scale)
            row_sigma.append(float(singular_values(jac.D)[-1]))
        full_rank.append(row_ok)
        sigma_min_d.append(row_sigma)
    return FullRankCheck(full_rank=full_rank, sigma_min_D=sigma_min_d)
