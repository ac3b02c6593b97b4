"""
``resnetlab bounds``: certified proximity bounds against measured distances
over random instances (Euler vs neural ODE, or ResNet vs its MLP limit).

Besides the per-row bound check the sweep judges the shape of the error:
Euler errors must halve with the step (order ratios near 2) and MLP-limit
errors must be linear in eps (small spread of err/eps per model). MLP sweeps
also check that level sets between the reference extremes reach the boundary.
"""

from typing import Any, Dict, List, Tuple

import numpy as np
import pandas as pd

from backend.expressivity.bounds import (
    certify_euler,
    certify_mlp,
    certify_mlp_crossings,
    euler_order_ratios,
    mlp_eps_spread,
    reports_to_frame,
)
from backend.expressivity.models import random_autonomous_node, random_drift_model, random_model, resnet_to_mlp
from backend.expressivity.numerics import Box
from backend.expressivity.regimes import Verdict, classify_regime
from frontend.run_config import BoundsConfig
from frontend.ui_components import ArtifactWriter, print_summary, run_parallel
from utils.core.exceptions import PropertyViolation, VerdictInapplicableError
from utils.core.logging import get_project_logger
from utils.core.seeding import make_rng

logger = get_project_logger(__name__)


def _reference_is_critical_free(model, domain: Box) -> bool:
    """The MLP limit carries a no-critical-point certificate on ``domain``."""
    try:
        return classify_regime(resnet_to_mlp(model), domain).verdict == Verdict.MLP_SIDE
    except VerdictInapplicableError:
        return False


def _mlp_model(config: BoundsConfig, rng: np.random.Generator):
    depth = int(rng.integers(1, config.max_depth + 1)) if config.max_depth else config.depth
    if config.family == "drift":
        return random_drift_model(rng, n_in=config.n_in, n_hid=config.n_hid, depth=depth, eps=0.5,
                                  delta=config.delta)
    return random_model(rng, n_in=config.n_in, n_hid=config.n_hid, depth=depth, eps=0.5,
                        delta=config.delta, weight_range=config.weight_range)


def _sweep_instance(config: BoundsConfig, domain: Box, index: int) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    rng = make_rng(config.seed, "bounds", config.kind, index)
    resolution = config.domain.resolution if config.domain else None
    if config.kind == "euler":
        spec = random_autonomous_node(rng, n_in=config.n_in, n_hid=config.n_hid, horizon_T=config.horizon_T,
                                      weight_bound=config.weight_bound)
        reports = certify_euler(spec, config.depths, domain, resolution)
        frame = reports_to_frame(reports)
        ratios = euler_order_ratios(reports)
        lo, hi = config.order_ratio_range
        finest = ratios[:2]
        stats = {
            "instance": index,
            "order_ratio_finest": finest[0] if finest else np.nan,
            "order_ratio_second": finest[1] if len(finest) > 1 else np.nan,
            "order_in_range": len(finest) == 2 and all(lo <= r <= hi for r in finest),
        }
    else:
        model = _mlp_model(config, rng)
        reports = certify_mlp(model, config.eps_values, domain, resolution)
        frame = reports_to_frame(reports)
        crossings = certify_mlp_crossings(model, reports, domain, resolution) if config.crossings \
            else [None] * len(reports)
        certified = _reference_is_critical_free(model, domain) if config.crossings else False
        frame["crossing_applicable"] = [bool(c is not None and c.applicable) for c in crossings]
        frame["crossing_pass"] = [c.all_intersect if c is not None and c.applicable else None for c in crossings]
        frame["reference_certified"] = certified
        stats = {
            "instance": index,
            "L": model.depth,
            "eps_spread": mlp_eps_spread(reports) if reports else 0.0,
            "crossings_applicable": int(frame["crossing_applicable"].sum()),
            "crossing_misses": int(sum(1 for c in crossings if c is not None and c.applicable
                                       and not c.all_intersect)),
            "reference_certified": certified,
        }
    frame.insert(0, "instance", index)
    logger.debug(f"instance {index}: {stats}")
    return frame, stats


def _shape_failures(config: BoundsConfig, instances: pd.DataFrame, summary: Dict[str, Any]) -> List[Tuple[str, str]]:
    """Sweep-level checks on the error shape; fills ``summary`` and returns (code, message) pairs."""
    failures = []
    if not len(instances):
        return failures
    if config.kind == "euler":
        measurable = instances[instances["order_ratio_second"].notna()]
        if len(measurable):
            fraction = float(measurable["order_in_range"].mean())
            summary["order ratio fraction"] = fraction
            if fraction < config.min_order_fraction:
                lo, hi = config.order_ratio_range
                failures.append(("ORDER_RATIO_MISSED",
                                 f"only {fraction:.0%} of specs have both finest ratios in [{lo}, {hi}]"))
        return failures

    if len(config.eps_values) >= 2:
        worst = float(instances["eps_spread"].max())
        wide = int((instances["eps_spread"] > config.max_eps_spread).sum())
        summary["max eps spread"] = worst
        if wide:
            failures.append(("EPS_SPREAD_EXCEEDED",
                             f"{wide} model(s) with err/eps spread above {config.max_eps_spread}"))
    summary["crossing checks"] = int(instances["crossings_applicable"].sum())
    misses = int(instances.loc[instances["reference_certified"].astype(bool), "crossing_misses"].sum())
    summary["crossing misses"] = misses
    if misses:
        failures.append(("LEVEL_CROSSING_MISSED",
                         f"{misses} level set(s) between the reference extremes avoid the boundary"))
    return failures


def main(config: BoundsConfig, writer: ArtifactWriter) -> List[int]:
    domain = config.domain.box() if config.domain else Box.cube(-1.0, 1.0, config.n_in)
    if config.instances == 0 or (config.kind == "euler" and not config.depths) or \
            (config.kind == "mlp" and not config.eps_values):
        logger.warning(f"Empty {config.kind} sweep, nothing to certify")
    results = run_parallel(lambda i: _sweep_instance(config, domain, i), list(range(config.instances)))
    frames = [frame for frame, _ in results]
    table = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=["instance"])
    instances = pd.DataFrame([stats for _, stats in results])
    writer.write_csv(f"bounds_{config.kind}.csv", table)
    writer.write_csv(f"bounds_{config.kind}_instances.csv", instances if len(instances)
                     else pd.DataFrame(columns=["instance"]))

    violations = int((~table["pass"].astype(bool)).sum()) if "pass" in table and len(table) else 0
    summary = {"kind": config.kind, "instances": config.instances, "rows": len(table), "violations": violations}
    if len(table):
        summary["max empirical / bound"] = float(np.max(table["empirical"] / np.maximum(table["theoretical"], 1e-300)))
    failures = _shape_failures(config, instances, summary)
    print_summary("bounds", summary)
    if violations:
        raise PropertyViolation(f"{violations} measured distance(s) exceed the certified bound",
                                error_code="BOUND_BREACH", details={"kind": config.kind})
    if failures:
        code, message = failures[0]
        raise PropertyViolation(message, error_code=code,
                                details={"kind": config.kind, "failures": [c for c, _ in failures]})
    return [config.seed]
