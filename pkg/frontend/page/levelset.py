"""
``resnetlab levelset``: level-set components and tunnel verdict of a saved model.

Besides the component report the command runs the 1-D tunnel test or the 2-D
XOR signature, and with a reference model checks that every level between
the reference extremes (shrunk by the distance mu) reaches the boundary.
"""

from typing import List, Optional

import numpy as np
from pydantic import BaseModel

from backend.expressivity.models import load_model
from backend.expressivity.numerics import Box, default_resolution
from backend.expressivity.topology import (
    GridDomain,
    LevelCrossingReport,
    certify_level_crossings,
    evaluate_grid,
    level_components,
    marching_squares,
    tunnel_check_1d,
    xor_tunnel_signature,
)
from frontend.run_config import LevelsetConfig
from frontend.ui_components import ArtifactWriter, print_summary, render_curve_svg, render_level_svg
from utils.core.exceptions import ConfigurationError
from utils.core.logging import get_project_logger

logger = get_project_logger(__name__)


class FieldSummary(BaseModel):
    """Evaluation-only result for domains of dimension 3 and more."""

    level_c: float
    dim: int
    points: int
    minimum: float
    maximum: float
    fraction_above: float


class TopologyChecks(BaseModel):
    """Checks beyond the component report; fields that do not apply stay None."""

    level_c: float
    tunnel_1d: Optional[bool] = None
    xor_signature: Optional[bool] = None
    crossings: Optional[LevelCrossingReport] = None


def _crossing_text(crossings: LevelCrossingReport) -> str:
    if not crossings.applicable:
        return f"not applicable (mu={crossings.mu:.4g})"
    return f"{sum(crossings.intersects)}/{len(crossings.intersects)} levels reach the boundary"


def main(config: LevelsetConfig, writer: ArtifactWriter) -> List[int]:
    if config.model is None:
        raise ConfigurationError("levelset needs a model file (--model)", error_code="MISSING_MODEL")
    model = load_model(config.model)
    box = config.domain.box() if config.domain else Box.cube(-1.0, 1.0, model.n_in)
    resolution = config.domain.resolution if config.domain and config.domain.resolution else \
        default_resolution(box.dim)
    grid = GridDomain(box=box, resolution=resolution)
    field = evaluate_grid(model, grid)
    c = config.level

    if grid.dim >= 3:
        logger.warning(f"{grid.dim}-D domain: components are not computed, evaluation-only mode")
        summary = FieldSummary(level_c=c, dim=grid.dim, points=int(field.size), minimum=float(field.min()),
                               maximum=float(field.max()), fraction_above=float(np.mean(field > c)))
        writer.write_json("field_summary.json", summary)
        print_summary("levelset (evaluation only)", summary.model_dump())
        return [config.seed]

    report = level_components(field, grid, c)
    writer.write_json("levelset_report.json", report)
    checks = TopologyChecks(level_c=c)
    if grid.dim == 1:
        checks.tunnel_1d = tunnel_check_1d(model, (float(box.lo[0]), float(box.hi[0])), c, grid.shape[0])
    else:
        checks.xor_signature = xor_tunnel_signature(field, grid, c)
    if config.reference is not None:
        reference = load_model(config.reference)
        reference_field = evaluate_grid(reference, grid)
        mu = config.mu if config.mu is not None else float(np.max(np.abs(field - reference_field)))
        checks.crossings = certify_level_crossings(field, reference_field, grid, mu)
    writer.write_json("levelset_checks.json", checks)
    if grid.dim == 2:
        svg = render_level_svg(field, grid, c, marching_squares(field, grid, c), title=str(config.model.name))
    else:
        svg = render_curve_svg(grid.axes()[0], {"model": field}, level=c, title=str(config.model.name))
    writer.write_text("levelset.svg", svg)
    rows = {
        "level c": c,
        "sub-level components": len(report.components_sub),
        "super-level components": len(report.components_super),
        "boundary intersection": report.boundary_intersection,
        "verdict": report.tunnel_verdict.value,
    }
    if checks.tunnel_1d is not None:
        rows["1-D tunnel"] = checks.tunnel_1d
    if checks.xor_signature is not None:
        rows["XOR signature"] = checks.xor_signature
    if checks.crossings is not None:
        rows["level crossings"] = _crossing_text(checks.crossings)
    print_summary("levelset", rows)
    return [config.seed]
