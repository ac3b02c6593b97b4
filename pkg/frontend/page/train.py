"""
``resnetlab train``: the toy training protocol. Every run trains one model on
the shared dataset from its own init/shuffle seed and saves the model, its
loss record and a level-set figure. A preset may name a per-run criterion
(tunnel, bounded component, XOR signature, monotone 1-D fit) that a minimum
number of runs must meet.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from backend.expressivity.gradients import input_gradient_batch
from backend.expressivity.models import ResNetModel, dumps_model, evaluate
from backend.expressivity.topology import (
    GridDomain,
    TunnelVerdict,
    decision_boundary_level,
    evaluate_grid,
    level_components,
    marching_squares,
    tunnel_check_1d,
    xor_tunnel_signature,
)
from backend.expressivity.training import Dataset, TrainRecord, make_dataset, train, xavier_init
from frontend.run_config import RunCriterion, TrainRunConfig
from frontend.ui_components import ArtifactWriter, print_summary, render_curve_svg, render_level_svg, run_parallel
from utils.core.exceptions import NumericalError, PropertyViolation
from utils.core.logging import get_project_logger
from utils.core.seeding import make_rng

logger = get_project_logger(__name__)

MONOTONE_GRID = 1001
SUMMARY_COLUMNS = ["seed", "final_loss", "accuracy", "level_c", "tunnel_verdict", "bounded_sub",
                   "xor_signature", "monotone", "sign_flip_fraction"]


@dataclass
class RunOutcome:
    seed: int
    model: ResNetModel
    record: TrainRecord
    level_c: float
    tunnel_verdict: Optional[str] = None
    field: Optional[np.ndarray] = None
    bounded_sub: Optional[bool] = None
    xor_signature: Optional[bool] = None
    monotone: Optional[bool] = None


class CriterionResult(BaseModel):
    kind: str
    runs: int
    satisfied: int
    min_runs: int
    rate: float = Field(..., ge=0, le=1)
    passed: bool
    satisfied_seeds: List[int] = Field(default_factory=list)


def run_seeds(config: TrainRunConfig) -> List[int]:
    """Run seeds drawn from the root seed; run k's seed does not depend on the run count."""
    return [int(make_rng(config.seed, "run", k).integers(0, 2 ** 31 - 1)) for k in range(config.runs)]


def is_monotone_1d(model: ResNetModel, lo: float, hi: float, resolution: int = MONOTONE_GRID) -> bool:
    """``Phi'`` keeps one sign (zeros allowed) on a uniform grid of ``[lo, hi]``."""
    xs = np.linspace(lo, hi, resolution)[:, None]
    grads = input_gradient_batch(model, xs, 0)[:, 0]
    return bool(np.all(grads >= 0) or np.all(grads <= 0))


def _train_one(config: TrainRunConfig, dataset: Dataset, seed: int) -> RunOutcome:
    model = xavier_init(config.skeleton, seed)
    try:
        trained, record = train(model, dataset, config.train.model_copy(update={"seed": seed}),
                                frozen_patterns=config.skeleton.frozen_patterns())
    except NumericalError as e:
        raise NumericalError(f"Run with seed {seed} diverged: {e.message}", error_code=e.error_code,
                             details={**e.details, "seed": seed}) from e

    if dataset.kind.is_classification:
        level_c = decision_boundary_level(evaluate(trained, dataset.inputs)[:, 0], dataset.targets)
    else:
        level_c = float(np.median(dataset.targets))
    grid = GridDomain(box=dataset.domain, resolution=config.figure_resolution)
    field = evaluate_grid(trained, grid)
    outcome = RunOutcome(seed=seed, model=trained, record=record, level_c=level_c, field=field)
    if grid.dim == 2:
        report = level_components(field, grid, level_c)
        outcome.tunnel_verdict = report.tunnel_verdict.value
        outcome.bounded_sub = any(component.bounded for component in report.components_sub)
        outcome.xor_signature = xor_tunnel_signature(field, grid, level_c)
    elif grid.dim == 1:
        lo, hi = float(grid.lo[0]), float(grid.hi[0])
        tunnel = tunnel_check_1d(trained, (lo, hi), level_c, config.figure_resolution)
        outcome.tunnel_verdict = TunnelVerdict.TUNNEL_PRESENT.value if tunnel \
            else level_components(field, grid, level_c).tunnel_verdict.value
        outcome.monotone = is_monotone_1d(trained, lo, hi)
    return outcome


def _meets(criterion: RunCriterion, outcome: RunOutcome) -> bool:
    if criterion.kind == "tunnel":
        return outcome.tunnel_verdict == TunnelVerdict.TUNNEL_PRESENT.value
    if criterion.kind == "bounded_accurate":
        return bool(outcome.bounded_sub) and outcome.record.accuracy is not None \
            and outcome.record.accuracy >= criterion.min_accuracy
    if criterion.kind == "xor_signature":
        return bool(outcome.xor_signature)
    return bool(outcome.monotone)


def evaluate_criterion(criterion: RunCriterion, outcomes: List[RunOutcome]) -> CriterionResult:
    seeds = [outcome.seed for outcome in outcomes if _meets(criterion, outcome)]
    return CriterionResult(kind=criterion.kind, runs=len(outcomes), satisfied=len(seeds),
                           min_runs=criterion.min_runs, rate=len(seeds) / len(outcomes) if outcomes else 0.0,
                           passed=len(seeds) >= criterion.min_runs, satisfied_seeds=seeds)


def main(config: TrainRunConfig, writer: ArtifactWriter) -> List[int]:
    dataset = make_dataset(config.dataset.kind, config.dataset.size, config.seed, band=config.dataset.band,
                           center=config.dataset.center)
    writer.write_csv("dataset.csv", dataset.to_frame())
    seeds = run_seeds(config)
    if not seeds:
        logger.warning("No training runs requested")
    outcomes = run_parallel(lambda seed: _train_one(config, dataset, seed), seeds)

    grid = GridDomain(box=dataset.domain, resolution=config.figure_resolution)
    rows = []
    for outcome in outcomes:
        prefix = f"seed_{outcome.seed}"
        writer.write_text(f"{prefix}/model.json", dumps_model(outcome.model))
        writer.write_csv(f"{prefix}/record.csv", outcome.record.to_frame())
        title = f"{dataset.kind.value} seed {outcome.seed}"
        if grid.dim == 2:
            segments = marching_squares(outcome.field, grid, outcome.level_c)
            svg = render_level_svg(outcome.field, grid, outcome.level_c, segments, dataset.inputs,
                                   dataset.targets, title=title)
            writer.write_text(f"{prefix}/levelset.svg", svg)
        elif grid.dim == 1:
            xs = grid.axes()[0]
            svg = render_curve_svg(xs, {"model": outcome.field, "target": xs ** 2}
                                   if dataset.kind.value == "Quad1D" else {"model": outcome.field},
                                   level=outcome.level_c, title=title)
            writer.write_text(f"{prefix}/prediction.svg", svg)
        rows.append({
            "seed": outcome.seed,
            "final_loss": outcome.record.losses[-1] if outcome.record.losses else float("nan"),
            "accuracy": outcome.record.accuracy,
            "level_c": outcome.level_c,
            "tunnel_verdict": outcome.tunnel_verdict,
            "bounded_sub": outcome.bounded_sub,
            "xor_signature": outcome.xor_signature,
            "monotone": outcome.monotone,
            "sign_flip_fraction": outcome.record.sign_flip_fraction,
        })
    summary = pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
    writer.write_csv("summary.csv", summary)

    stats: Dict[str, object] = {"dataset": dataset.kind.value, "runs": len(seeds)}
    if len(summary):
        stats["best final loss"] = float(summary["final_loss"].min())
        if dataset.kind.is_classification:
            stats["best accuracy"] = float(summary["accuracy"].max())
        stats["verdicts"] = ", ".join(f"{v}: {n}" for v, n in summary["tunnel_verdict"].value_counts().items())

    result = None
    if config.criterion is not None:
        result = evaluate_criterion(config.criterion, outcomes)
        writer.write_json("criterion.json", result)
        stats["criterion"] = f"{result.kind} {result.satisfied}/{result.runs} (need {result.min_runs})"
    print_summary("train", stats)
    if result is not None and not result.passed:
        raise PropertyViolation(
            f"Criterion {result.kind} met in {result.satisfied}/{result.runs} runs, {result.min_runs} required",
            error_code="CRITERION_MISSED",
            details={"kind": result.kind, "satisfied": result.satisfied, "min_runs": result.min_runs},
        )
    return seeds
