"""
``resnetlab regime``: constants, thresholds and the critical-point verdict of a
saved model, optionally cross-checked by a numerical search.
"""

from typing import List, Optional

import numpy as np
from pydantic import BaseModel

from backend.expressivity.models import Activation, ResNetModel, load_model
from backend.expressivity.numerics import Box, inf_norm_vec
from backend.expressivity.regimes import Verdict, classify_regime, one_layer_exclusion, pointwise_full_rank_check
from backend.expressivity.topology import GridDomain, critical_point_search
from frontend.run_config import RegimeConfig
from frontend.ui_components import ArtifactWriter, print_summary
from utils.core.exceptions import ConfigurationError, PropertyViolation
from utils.core.logging import get_project_logger

logger = get_project_logger(__name__)

SEARCH_RESOLUTION = {1: 2001, 2: 101, 3: 21}
RANK_CHECK_RESOLUTION = {1: 201, 2: 41, 3: 9}


class OneLayerSummary(BaseModel):
    """Exact verdict for a scalar model with a single tanh residual layer."""

    alpha: float
    product: float
    no_critical_point: bool
    reason: str
    critical_preactivation: Optional[float] = None


class RankCheckSummary(BaseModel):
    """Layer Jacobians tested along the forward trace of every lattice point."""

    points: int
    layers: int
    deficient_points: int
    min_sigma_min_D: float
    all_full_rank: bool


def one_layer_summary(model: ResNetModel, domain: Box) -> Optional[OneLayerSummary]:
    """None unless the model is scalar with exactly one tanh layer and eps, delta > 0."""
    if model.n_hid != 1 or model.depth != 1 or model.eps <= 0 or model.delta <= 0:
        return None
    layer = model.layers[0]
    if layer.act != Activation.TANH or layer.W.shape != (1, 1):
        return None
    # the layer input ranges over |h| <= H_0, so |W h + b| <= |W| H_0 + |b|
    h0 = model.input_map.sup_norm_on(domain.lo, domain.hi)
    result = one_layer_exclusion(model.delta / model.eps, float(layer.W_tilde[0, 0]), float(layer.W[0, 0]),
                                 omega_inf=abs(float(layer.W[0, 0])) * h0, beta_inf=inf_norm_vec(layer.b))
    return OneLayerSummary(alpha=model.delta / model.eps, product=result.product,
                           no_critical_point=result.no_critical_point, reason=result.reason,
                           critical_preactivation=result.critical_preactivation)


def rank_check_summary(model: ResNetModel, domain: Box) -> Optional[RankCheckSummary]:
    """None when the pointwise check does not apply (eps or delta zero, no layers)."""
    if model.eps <= 0 or model.delta <= 0 or model.depth == 0:
        return None
    points = domain.lattice(RANK_CHECK_RESOLUTION.get(domain.dim, 5))
    check = pointwise_full_rank_check(model, points)
    deficient = sum(1 for row in check.full_rank if not all(row))
    return RankCheckSummary(points=len(points), layers=model.depth, deficient_points=deficient,
                            min_sigma_min_D=float(np.min(check.sigma_min_D)), all_full_rank=check.all_full_rank)


def main(config: RegimeConfig, writer: ArtifactWriter) -> List[int]:
    if config.model is None:
        raise ConfigurationError("regime needs a model file (--model)", error_code="MISSING_MODEL")
    model = load_model(config.model)
    domain = config.domain.box() if config.domain else Box.cube(-1.0, 1.0, model.n_in)

    report = classify_regime(model, domain)
    writer.write_json("regime_report.json", report)
    constants = report.constants
    print_summary("regime", {
        "eps / delta": f"{model.eps:g} / {model.delta:g}",
        "alpha": constants.alpha,
        "nu_max / nu_min": f"{constants.nu_max:.6g} / {constants.nu_min:.6g}",
        "K_sigma / k_sigma": f"{constants.K_sigma:.6g} / {constants.k_sigma:.6g}",
        "1/(nu_max K_sigma)": report.thresholds[0],
        "1/(nu_min k_sigma)": report.thresholds[1],
        "branch": report.branch,
        "verdict": report.verdict.value,
        "flags": ", ".join(report.flags) or "-",
    })

    one_layer = one_layer_summary(model, domain)
    if one_layer is not None:
        writer.write_json("one_layer.json", one_layer)
        print_summary("single layer", {"W~ W": one_layer.product, "no critical point": one_layer.no_critical_point,
                                       "reason": one_layer.reason})
    rank = rank_check_summary(model, domain)
    if rank is not None:
        writer.write_json("rank_check.json", rank)
        print_summary("layer rank check", {"points": rank.points, "rank-deficient points": rank.deficient_points,
                                           "min sigma_min(D)": rank.min_sigma_min_D})
        if not rank.all_full_rank and report.verdict != Verdict.INDETERMINATE:
            logger.warning(f"Verdict {report.verdict.value} but {rank.deficient_points} lattice point(s) "
                           f"have a near-singular layer Jacobian")

    if config.search:
        resolution = config.domain.resolution if config.domain and config.domain.resolution else \
            SEARCH_RESOLUTION.get(model.n_in, 11)
        grid = GridDomain(box=domain, resolution=resolution)
        result = critical_point_search(model, grid, seeds=config.search_seeds)
        writer.write_json("critical_search.json", result)
        print_summary("critical-point search", {
            "found": result.found,
            "location": result.location,
            "|grad|_inf": result.grad_norm,
            "candidates": len(result.candidates),
        })
        if result.found and report.verdict != Verdict.INDETERMINATE:
            raise PropertyViolation(
                f"Verdict {report.verdict.value} contradicted by a critical point at {result.location}",
                error_code="VERDICT_CONTRADICTION",
                details={"grad_norm": result.grad_norm},
            )
    return [config.seed]
