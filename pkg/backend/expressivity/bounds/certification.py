"""
Empirical sup-norm distances and bound certification sweeps.
"""

import contextvars
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Callable, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from utils.config import get_runtime_settings
from utils.core.exceptions import DimensionError, ValidationError
from utils.core.logging import get_project_logger
from ..models import NeuralOdeSpec, ResNetModel, euler_discretize, evaluate, integrate_node_batch, resnet_to_mlp
from ..numerics import Box, default_resolution, inf_norm_mat, inf_norm_vec
from ..topology import GridDomain, LevelCrossingReport, certify_level_crossings, evaluate_grid
from .formulas import CanonicalConstants, MlpBoundInputs, euler_bound_canonical, mlp_bound_explicit

logger = get_project_logger(__name__)

BatchEvaluator = Callable[[np.ndarray], np.ndarray]

CHUNK_ROWS = 8192
REFERENCE_STEP_FACTOR = 10
CROSSING_LEVELS = 11
CSV_COLUMNS = ["kind", "eps_or_delta", "L", "theoretical", "empirical", "margin", "pass"]


class CanonicalInputs(BaseModel):
    """Instance constants needed by both bound families."""

    canonical: CanonicalConstants
    S_lambda: float = Field(..., ge=0, description="sup of ||lambda(x)||_inf on the domain")
    K_lambda_tilde: float = Field(..., ge=0, description="Lipschitz constant of lambda~")
    S_f: float = Field(..., ge=0, description="max_l sup ||f_l||_inf")
    K_f: float = Field(..., ge=0, description="max_l Lipschitz constant of f_l")


class BoundReport(BaseModel):
    """One certified bound against its measured counterpart."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    kind: str = Field(..., description="euler | mlp")
    eps_or_delta: float
    L: int
    theoretical: float
    empirical: float
    samples: int
    domain_lo: List[float]
    domain_hi: List[float]

    @property
    def margin(self) -> float:
        return self.theoretical - self.empirical

    @property
    def passed(self) -> bool:
        return self.margin >= 0

    def to_row(self) -> dict:
        return {
            "kind": self.kind,
            "eps_or_delta": self.eps_or_delta,
            "L": self.L,
            "theoretical": self.theoretical,
            "empirical": self.empirical,
            "margin": self.margin,
            "pass": self.passed,
        }


def reports_to_frame(reports: Iterable[BoundReport]) -> pd.DataFrame:
    return pd.DataFrame([report.to_row() for report in reports], columns=CSV_COLUMNS)


def canonical_inputs_for(source: Union[ResNetModel, NeuralOdeSpec], domain: Box) -> CanonicalInputs:
    """Derive the bound constants of a concrete model or neural ODE on ``domain``."""
    branches = source.layers if isinstance(source, ResNetModel) else source.fields
    if source.n_in != domain.dim:
        raise DimensionError(f"Domain is {domain.dim}-D, input is {source.n_in}-D", error_code="SHAPE_MISMATCH")
    act = branches[0].act if branches else source.input_map.act
    if branches:
        canonical = CanonicalConstants(
            omega_inf=max(inf_norm_mat(b.W) for b in branches),
            omega_tilde_inf=max(inf_norm_mat(b.W_tilde) for b in branches),
            beta_tilde_inf=max(inf_norm_vec(b.b_tilde) for b in branches),
            S_sigma=act.S_sigma,
            K_sigma=act.K_sigma,
        )
        s_f = max(b.sup_norm() for b in branches)
        k_f = max(b.lipschitz_inf() for b in branches)
    else:
        canonical = CanonicalConstants(omega_inf=0, omega_tilde_inf=0, beta_tilde_inf=0,
                                       S_sigma=act.S_sigma, K_sigma=act.K_sigma)
        s_f = k_f = 0.0
    return CanonicalInputs(
        canonical=canonical,
        S_lambda=source.input_map.sup_norm_on(domain.lo, domain.hi),
        K_lambda_tilde=source.output_map.lipschitz_inf(),
        S_f=s_f,
        K_f=k_f,
    )


def model_evaluator(model: ResNetModel) -> BatchEvaluator:
    return lambda X: evaluate(model, X)


def node_evaluator(spec: NeuralOdeSpec, steps: int, method: str = "rk4") -> BatchEvaluator:
    return lambda X: integrate_node_batch(spec, X, steps, method)


def empirical_sup_distance(
    A: BatchEvaluator,
    B: BatchEvaluator,
    domain: Box,
    resolution: Optional[Union[int, Sequence[int]]] = None,
    threads: Optional[int] = None,
) -> float:
    """
    ``max_x ||A(x) - B(x)||_inf`` over a uniform lattice including the box corners.

    The lattice maximum is a lower bound of the true sup. Chunks are evaluated
    concurrently; the reduction is order independent.
    """
    points = domain.lattice(resolution or default_resolution(domain.dim))
    chunks = [points[i:i + CHUNK_ROWS] for i in range(0, len(points), CHUNK_ROWS)]

    def chunk_distance(X: np.ndarray) -> float:
        a, b = np.atleast_2d(A(X)), np.atleast_2d(B(X))
        if a.shape != b.shape:
            raise DimensionError(f"Evaluators disagree in output shape: {a.shape} vs {b.shape}",
                                 error_code="SHAPE_MISMATCH")
        return float(np.max(np.abs(a - b)))

    workers = min(threads or get_runtime_settings().threads, len(chunks))
    if workers <= 1:
        return max(chunk_distance(X) for X in chunks)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(contextvars.copy_context().run, chunk_distance, X) for X in chunks]
        return max(future.result() for future in futures)


def certify_euler(
    spec: NeuralOdeSpec,
    depths: Sequence[int],
    domain: Box,
    resolution: Optional[Union[int, Sequence[int]]] = None,
) -> List[BoundReport]:
    """
    Compare ``euler_discretize(spec, L)`` with an RK4 reference at 10 * max(L) steps.

    Raises:
        ValidationError: If the field has a linear part (no canonical bound)
    """
    if spec.linear_coefficient != 0:
        raise ValidationError("Canonical Euler bound needs a field without linear part",
                              error_code="NON_CANONICAL_FIELD")
    if not depths:
        logger.warning("Empty Euler sweep")
        return []
    inputs = canonical_inputs_for(spec, domain)
    reference = node_evaluator(spec, REFERENCE_STEP_FACTOR * max(depths), "rk4")
    points = domain.lattice(resolution or default_resolution(domain.dim))
    reference_values = reference(points)

    reports = []
    for L in depths:
        model = euler_discretize(spec, L)
        empirical = float(np.max(np.abs(evaluate(model, points) - reference_values)))
        theoretical = euler_bound_canonical(inputs.canonical, inputs.K_lambda_tilde, spec.horizon_T, model.delta)
        report = BoundReport(kind="euler", eps_or_delta=model.delta, L=L, theoretical=theoretical,
                             empirical=empirical, samples=len(points),
                             domain_lo=domain.lo.tolist(), domain_hi=domain.hi.tolist())
        logger.info(f"euler L={L}: bound {theoretical:.4e}, measured {empirical:.4e}")
        reports.append(report)
    return reports


def certify_mlp(
    model: ResNetModel,
    eps_values: Sequence[float],
    domain: Box,
    resolution: Optional[Union[int, Sequence[int]]] = None,
) -> List[BoundReport]:
    """
    Compare ``model`` at each eps with its eps = 0 counterpart.

    Raises:
        ValidationError: If any eps lies outside (0, 1)
    """
    bad = [eps for eps in eps_values if not 0.0 < eps < 1.0]
    if bad:
        raise ValidationError(f"MLP sweep needs 0 < eps < 1, got {bad}", error_code="EPS_OUT_OF_RANGE")
    if not eps_values:
        logger.warning("Empty MLP sweep")
        return []
    inputs = canonical_inputs_for(model, domain)
    mlp = resnet_to_mlp(model)
    points = domain.lattice(resolution or default_resolution(domain.dim))
    reference_values = evaluate(mlp, points)

    reports = []
    for eps in eps_values:
        variant = replace(model, eps=float(eps))
        empirical = float(np.max(np.abs(evaluate(variant, points) - reference_values)))
        if model.depth == 0 or model.delta == 0:
            # no residual layers to compare with, or a pure skip path
            theoretical = eps ** model.depth * inputs.K_lambda_tilde * inputs.S_lambda if model.depth else 0.0
        else:
            theoretical = mlp_bound_explicit(MlpBoundInputs(
                eps=eps, delta=model.delta, L=model.depth, S_f=inputs.S_f, K_f=inputs.K_f,
                S_lambda=inputs.S_lambda, K_lambda_tilde=inputs.K_lambda_tilde,
            ))
        report = BoundReport(kind="mlp", eps_or_delta=float(eps), L=model.depth, theoretical=theoretical,
                             empirical=empirical, samples=len(points),
                             domain_lo=domain.lo.tolist(), domain_hi=domain.hi.tolist())
        logger.info(f"mlp eps={eps}: bound {theoretical:.4e}, measured {empirical:.4e}")
        reports.append(report)
    return reports


def euler_order_ratios(reports: Sequence[BoundReport]) -> List[float]:
    """``err(delta) / err(delta/2)`` for consecutive halvings in an Euler sweep."""
    by_delta = {round(r.eps_or_delta, 15): r.empirical for r in reports if r.kind == "euler"}
    ratios = []
    for delta, err in sorted(by_delta.items()):
        half = round(delta / 2.0, 15)
        if half in by_delta and by_delta[half] > 0:
            ratios.append(err / by_delta[half])
    return ratios


def mlp_eps_spread(reports: Sequence[BoundReport]) -> float:
    """Relative spread ``(max - min) / max`` of ``err / eps`` over an MLP sweep."""
    scaled = [r.empirical / r.eps_or_delta for r in reports if r.kind == "mlp"]
    if not scaled or max(scaled) == 0:
        return 0.0
    return (max(scaled) - min(scaled)) / max(scaled)


def certify_mlp_crossings(
    model: ResNetModel,
    reports: Sequence[BoundReport],
    domain: Box,
    resolution: Optional[Union[int, Sequence[int]]] = None,
    levels: int = CROSSING_LEVELS,
) -> List[Optional[LevelCrossingReport]]:
    """
    Level crossings of each swept eps variant against the eps = 0 reference,
    with the certified bound of the matching report as mu.

    Entries are None where level sets are not computed (inputs beyond 2-D).
    The reference must be free of interior critical points for a miss to mean
    anything; callers check that separately.
    """
    if domain.dim > 2:
        logger.debug(f"No level-crossing check on a {domain.dim}-D domain")
        return [None] * len(reports)
    grid = GridDomain(domain, resolution or default_resolution(domain.dim))
    reference_field = evaluate_grid(resnet_to_mlp(model), grid)
    crossings = []
    for report in reports:
        field = evaluate_grid(replace(model, eps=report.eps_or_delta), grid)
        crossings.append(certify_level_crossings(field, reference_field, grid, mu=report.theoretical,
                                                 levels=levels))
    return crossings
