"""
Numerical search for critical points and decision thresholds.
"""

from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field

from utils.core.exceptions import ValidationError
from utils.core.logging import get_project_logger
from ..gradients import input_gradient_batch
from ..models import ResNetModel
from .grid import GridDomain

logger = get_project_logger(__name__)

CRITICAL_TOLERANCE = 1e-8
MAX_NEWTON_ITERATIONS = 100
MAX_HALVINGS = 40
HESSIAN_STEP = 1e-6
DEFAULT_SEEDS = 8
COARSE_CHUNK = 16384


class CriticalSearchResult(BaseModel):
    """Best point found; ``candidates`` lists every distinct refined critical point."""

    found: bool
    location: List[float]
    grad_norm: float
    refined: bool
    iterations: int = 0
    candidates: List[List[float]] = Field(default_factory=list)
    diagnostics: List[str] = Field(default_factory=list)


def _grad(model: ResNetModel, x: np.ndarray) -> np.ndarray:
    return input_gradient_batch(model, x[None, :])[0]


def _hessian(model: ResNetModel, x: np.ndarray) -> np.ndarray:
    """3-point central differences of the exact gradient, symmetrised."""
    n = x.size
    steps = HESSIAN_STEP * np.maximum(1.0, np.abs(x))
    shifts = np.diag(steps)
    grads = input_gradient_batch(model, np.vstack([x + shifts, x - shifts]))
    H = ((grads[:n] - grads[n:]) / (2.0 * steps[:, None])).T
    return 0.5 * (H + H.T)


def _refine(model: ResNetModel, x0: np.ndarray, grid: GridDomain):
    """Damped Newton on grad Phi = 0 with step halving; gradient descent on ||grad||^2 as fallback."""
    x = x0.copy()
    g = _grad(model, x)
    objective = float(g @ g)
    iterations = 0
    for iterations in range(1, MAX_NEWTON_ITERATIONS + 1):
        if np.max(np.abs(g)) < CRITICAL_TOLERANCE:
            break
        H = _hessian(model, x)
        try:
            direction = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            direction = -np.linalg.lstsq(H, g, rcond=None)[0]
        if not np.all(np.isfinite(direction)) or not np.any(direction):
            direction = -H.T @ g
        step = 1.0
        improved = False
        for _ in range(MAX_HALVINGS):
            candidate = grid.box.clip(x + step * direction)
            g_new = _grad(model, candidate)
            value = float(g_new @ g_new)
            if value < objective:
                x, g, objective, improved = candidate, g_new, value, True
                break
            step *= 0.5
        if not improved:
            break
    return x, float(np.max(np.abs(g))), iterations


def critical_point_search(
    model: ResNetModel,
    grid: GridDomain,
    seeds: int = DEFAULT_SEEDS,
    output_index: Optional[int] = None,
) -> CriticalSearchResult:
    """
    Scan ``||grad Phi||_inf`` on the lattice, then refine the best seeds.

    A critical point is reported only if refinement drives the gradient's
    max-norm below 1e-8; otherwise ``found`` is false and the best point is
    returned with diagnostics.
    """
    if model.n_out != 1 and output_index is None:
        raise ValidationError("Critical-point search needs a scalar output", error_code="NON_SCALAR_OUTPUT")
    if grid.dim != model.n_in:
        raise ValidationError(f"Grid is {grid.dim}-D, model input is {model.n_in}-D", error_code="SHAPE_MISMATCH")
    points = grid.points()
    norms = np.empty(len(points))
    for start in range(0, len(points), COARSE_CHUNK):
        chunk = points[start:start + COARSE_CHUNK]
        norms[start:start + len(chunk)] = np.max(np.abs(input_gradient_batch(model, chunk, output_index)), axis=1)

    order = np.argsort(norms, kind="stable")[:max(seeds, 1)]
    best_x, best_norm, best_iter = points[order[0]], float(norms[order[0]]), 0
    candidates: List[np.ndarray] = []
    diagnostics: List[str] = []
    spacing = float(np.min(grid.spacing()))
    for index in order:
        x, norm, iterations = _refine(model, points[index], grid)
        if norm < CRITICAL_TOLERANCE:
            if not any(np.max(np.abs(x - c)) < spacing for c in candidates):
                candidates.append(x)
        elif iterations >= MAX_NEWTON_ITERATIONS:
            diagnostics.append(f"seed {points[index].tolist()} hit the iteration cap at |grad|={norm:.3e}")
        if norm < best_norm:
            best_x, best_norm, best_iter = x, norm, iterations

    found = best_norm < CRITICAL_TOLERANCE
    logger.debug(f"critical search: best |grad|={best_norm:.3e} at {np.round(best_x, 6).tolist()}")
    return CriticalSearchResult(
        found=found,
        location=best_x.tolist(),
        grad_norm=best_norm,
        refined=best_iter > 0,
        iterations=best_iter,
        candidates=[c.tolist() for c in candidates],
        diagnostics=diagnostics,
    )


def threshold_accuracy(values, labels, c: float) -> float:
    """Accuracy of the rule ``label = 1 iff value > c``."""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1).astype(bool)
    return float(np.mean((values > c) == labels))


def decision_boundary_level(values, labels) -> float:
    """
    Threshold c maximizing the accuracy of ``value > c``.

    The optimal thresholds form intervals between sorted values. 0.5 is kept
    when it is optimal, otherwise the midpoint of the optimal interval closest
    to 0.5 is returned. With a single class the midpoint of the value range is
    returned.
    """
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1).astype(int)
    if values.size == 0 or values.size != labels.size:
        raise ValidationError("Need one label per value", error_code="SHAPE_MISMATCH")
    lo, hi = float(values.min()), float(values.max())
    if labels.min() == labels.max():
        logger.warning("Single-class labels, decision level falls back to the range midpoint")
        return 0.5 * (lo + hi)

    order = np.argsort(values, kind="stable")
    v, y = values[order], labels[order]
    n = v.size
    # k points below the threshold: zeros among them are right, ones above are right
    zeros_below = np.concatenate([[0], np.cumsum(y == 0)])
    ones_above = np.concatenate([np.cumsum((y == 1)[::-1])[::-1], [0]])
    correct = zeros_below + ones_above
    valid = np.ones(n + 1, dtype=bool)
    valid[1:n] = v[1:] > v[:-1]
    best = correct[valid].max()

    pad = 0.5 * max(hi - lo, 1.0)
    intervals = []
    current = None
    for k in range(n + 1):
        if not valid[k]:
            continue
        lower = float(v[k - 1]) if k > 0 else lo - pad
        upper = float(v[k]) if k < n else hi + pad
        if correct[k] == best:
            # the previous realisable threshold was optimal too, so the intervals touch
            current = [current[0], upper] if current else [lower, upper]
        elif current:
            intervals.append(tuple(current))
            current = None
    if current:
        intervals.append(tuple(current))

    # probability convention: keep 0.5 whenever it is optimal
    for a, b in intervals:
        if a <= 0.5 < b:
            return 0.5

    def distance_to_half(interval):
        a, b = interval
        return min(abs(a - 0.5), abs(b - 0.5))

    a, b = min(intervals, key=distance_to_half)
    return 0.5 * (a + b)
