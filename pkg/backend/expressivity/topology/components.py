"""
Connected components of strict sub- and super-level sets on 1-D/2-D grids.

Cells whose value is within half the local grid variation of the level (or
exactly on it) form the level band and belong to neither side. Components use
4-connectivity; a component that never reaches the lattice boundary is bounded
and witnesses an interior extremum.
"""

from enum import Enum
from typing import Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, Field

from utils.core.exceptions import ValidationError
from utils.core.logging import get_project_logger
from .grid import GridDomain, ScalarField, evaluate_grid

logger = get_project_logger(__name__)

BAND_FRACTION = 0.5


class UnionFind:
    """Disjoint sets over ``0 .. n-1`` with union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a: int) -> int:
        while a != self.parent[a]:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        a_root = self.find(a)
        b_root = self.find(b)
        if a_root == b_root:
            return
        if self.size[b_root] > self.size[a_root]:
            a_root, b_root = b_root, a_root
        self.parent[b_root] = a_root
        self.size[a_root] += self.size[b_root]


def label_components(mask: np.ndarray) -> Tuple[np.ndarray, int]:
    """
    4-connected labelling of a boolean 1-D or 2-D mask.

    Returns:
        Tuple[np.ndarray, int]: Labels (-1 outside the mask, 0..k-1 inside,
        numbered in raster order of first appearance) and the count k
    """
    if mask.ndim not in (1, 2):
        raise ValidationError(f"Component labelling supports 1-D and 2-D grids, got {mask.ndim}-D",
                              error_code="UNSUPPORTED_DIMENSION")
    flat = mask.reshape(-1)
    uf = UnionFind(flat.size)
    strides = [int(np.prod(mask.shape[axis + 1:])) for axis in range(mask.ndim)]
    for axis in range(mask.ndim):
        lead = [slice(None)] * mask.ndim
        trail = [slice(None)] * mask.ndim
        lead[axis] = slice(None, -1)
        trail[axis] = slice(1, None)
        pairs = mask[tuple(lead)] & mask[tuple(trail)]
        index_grid = np.arange(flat.size).reshape(mask.shape)[tuple(lead)]
        for a in index_grid[pairs]:
            uf.union(int(a), int(a) + strides[axis])

    labels = np.full(flat.size, -1, dtype=np.int64)
    roots: Dict[int, int] = {}
    for i in np.flatnonzero(flat):
        root = uf.find(int(i))
        if root not in roots:
            roots[root] = len(roots)
        labels[i] = roots[root]
    return labels.reshape(mask.shape), len(roots)


class TunnelVerdict(str, Enum):
    TUNNEL_PRESENT = "TunnelPresent"
    BOUNDED_COMPONENT = "BoundedComponentExists"
    EMPTY = "Empty"


class ComponentSummary(BaseModel):
    cell_count: int = Field(..., ge=1)
    touches_boundary: bool
    bounded: bool


class LevelSetReport(BaseModel):
    """Components of ``{f < c}`` and ``{f > c}`` with the tunnel verdict."""

    level_c: float
    components_sub: List[ComponentSummary]
    components_super: List[ComponentSummary]
    tunnel_verdict: TunnelVerdict
    boundary_intersection: bool = Field(..., description="The level set meets the domain boundary")
    band_cells: int
    total_cells: int

    @property
    def has_bounded_component(self) -> bool:
        return any(c.bounded for c in self.components_sub + self.components_super)


def level_band(field: np.ndarray, c: float) -> np.ndarray:
    """Cells assigned to the level set itself."""
    variation = np.zeros_like(field)
    for axis in range(field.ndim):
        diff = np.abs(np.diff(field, axis=axis))
        lead = [slice(None)] * field.ndim
        trail = [slice(None)] * field.ndim
        lead[axis] = slice(None, -1)
        trail[axis] = slice(1, None)
        variation[tuple(lead)] = np.maximum(variation[tuple(lead)], diff)
        variation[tuple(trail)] = np.maximum(variation[tuple(trail)], diff)
    gap = np.abs(field - c)
    return (gap < BAND_FRACTION * variation) | (gap == 0)


def _summaries(mask: np.ndarray, boundary: np.ndarray) -> Tuple[List[ComponentSummary], np.ndarray, int]:
    labels, count = label_components(mask)
    counts = np.bincount(labels[mask], minlength=count)
    touches = np.zeros(count, dtype=bool)
    touches[np.unique(labels[mask & boundary])] = True
    summaries = [ComponentSummary(cell_count=int(counts[k]), touches_boundary=bool(touches[k]),
                                  bounded=not bool(touches[k])) for k in range(count)]
    return summaries, labels, count


def level_components(field: np.ndarray, grid: GridDomain, c: float) -> LevelSetReport:
    """
    Strict sub/super-level components of a grid field at level ``c``.

    Verdict: ``Empty`` if either side has no cell, ``BoundedComponentExists`` if
    any component avoids the boundary, ``TunnelPresent`` otherwise.
    """
    field = np.asarray(field, dtype=np.float64)
    if field.shape != grid.shape:
        raise ValidationError(f"Field shape {field.shape} does not match grid {grid.shape}",
                              error_code="SHAPE_MISMATCH")
    if grid.dim not in (1, 2):
        raise ValidationError("Level-set components are only computed on 1-D and 2-D grids",
                              error_code="UNSUPPORTED_DIMENSION")
    band = level_band(field, c)
    sub = (field < c) & ~band
    sup = (field > c) & ~band
    boundary = grid.boundary_mask()
    components_sub, _, _ = _summaries(sub, boundary)
    components_super, _, _ = _summaries(sup, boundary)

    if not components_sub or not components_super:
        verdict = TunnelVerdict.EMPTY
    elif any(comp.bounded for comp in components_sub + components_super):
        verdict = TunnelVerdict.BOUNDED_COMPONENT
    else:
        verdict = TunnelVerdict.TUNNEL_PRESENT
    crossing = bool(np.any(band & boundary) or (np.any(sub & boundary) and np.any(sup & boundary)))
    report = LevelSetReport(
        level_c=float(c),
        components_sub=components_sub,
        components_super=components_super,
        tunnel_verdict=verdict,
        boundary_intersection=crossing,
        band_cells=int(band.sum()),
        total_cells=int(field.size),
    )
    logger.debug(f"level {c:.4g}: {len(components_sub)} sub / {len(components_super)} super components, {verdict.value}")
    return report


def tunnel_check_1d(
    f: ScalarField,
    interval: Tuple[float, float],
    c: float,
    resolution: int = 1001,
) -> bool:
    """
    True iff no strict sub- or super-level component of ``f`` at ``c`` lies in
    the interior of ``interval`` (and both sides are non-empty).
    """
    grid = GridDomain.from_bounds([interval[0]], [interval[1]], resolution)
    report = level_components(evaluate_grid(f, grid), grid, c)
    return report.tunnel_verdict == TunnelVerdict.TUNNEL_PRESENT


def xor_tunnel_signature(field: np.ndarray, grid: GridDomain, c: float, center_cells: int = 2) -> bool:
    """
    A super-level component passing within ``center_cells`` of the grid centre
    that reaches both the lower and the upper edge along the second axis.
    """
    if grid.dim != 2:
        raise ValidationError("XOR signature needs a 2-D grid", error_code="UNSUPPORTED_DIMENSION")
    field = np.asarray(field, dtype=np.float64)
    sup = (field > c) & ~level_band(field, c)
    labels, count = label_components(sup)
    if count == 0:
        return False
    ci, cj = grid.shape[0] // 2, grid.shape[1] // 2
    window = labels[max(ci - center_cells, 0):ci + center_cells + 1, max(cj - center_cells, 0):cj + center_cells + 1]
    central = set(int(k) for k in np.unique(window) if k >= 0)
    bottom = set(int(k) for k in np.unique(labels[:, 0]) if k >= 0)
    top = set(int(k) for k in np.unique(labels[:, -1]) if k >= 0)
    return bool(central & bottom & top)


class LevelCrossingReport(BaseModel):
    """Boundary intersection of the model's level sets inside the certified band."""

    value_interval: Tuple[float, float]
    mu: float
    measured_distance: float
    applicable: bool
    levels: List[float] = Field(default_factory=list)
    intersects: List[bool] = Field(default_factory=list)

    @property
    def mu_consistent(self) -> bool:
        return self.measured_distance <= self.mu

    @property
    def all_intersect(self) -> bool:
        return self.applicable and all(self.intersects)


def certify_level_crossings(
    model_field: np.ndarray,
    reference_field: np.ndarray,
    grid: GridDomain,
    mu: float,
    levels: int = 11,
) -> LevelCrossingReport:
    """
    For ``[a, b]`` the measured value range of the reference and ``mu < (b - a)/2``,
    check that every tested level in ``(a + mu, b - mu)`` meets the boundary.

    The caller supplies the reference (without interior critical points) and mu.
    """
    model_field = np.asarray(model_field, dtype=np.float64)
    reference_field = np.asarray(reference_field, dtype=np.float64)
    if model_field.shape != reference_field.shape:
        raise ValidationError("Model and reference fields differ in shape", error_code="SHAPE_MISMATCH")
    a, b = float(reference_field.min()), float(reference_field.max())
    measured = float(np.max(np.abs(model_field - reference_field)))
    if measured > mu:
        logger.warning(f"Measured distance {measured:.4g} exceeds the supplied mu {mu:.4g}")
    if not mu < (b - a) / 2:
        logger.info(f"mu={mu:.4g} leaves no level inside ({a:.4g}+mu, {b:.4g}-mu)")
        return LevelCrossingReport(value_interval=(a, b), mu=mu, measured_distance=measured, applicable=False)
    tested = np.linspace(a + mu, b - mu, levels + 2)[1:-1]
    intersects = [level_components(model_field, grid, float(c)).boundary_intersection for c in tested]
    return LevelCrossingReport(value_interval=(a, b), mu=mu, measured_distance=measured, applicable=True,
                               levels=tested.tolist(), intersects=intersects)
