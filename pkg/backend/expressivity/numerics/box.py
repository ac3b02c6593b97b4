"""
Axis-aligned boxes and uniform lattices on them.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from utils.core.exceptions import DimensionError, ValidationError
from .linalg import Vec64, as_vec


@dataclass(frozen=True)
class Box:
    """Closed box ``[lo_1, hi_1] x ... x [lo_n, hi_n]``."""

    lo: Vec64
    hi: Vec64

    def __post_init__(self):
        lo = as_vec(self.lo, "lo")
        hi = as_vec(self.hi, "hi")
        if lo.shape != hi.shape:
            raise DimensionError(f"Box bounds differ in dimension: {lo.size} vs {hi.size}",
                                 error_code="SHAPE_MISMATCH")
        if np.any(lo >= hi):
            raise ValidationError("Box needs lo < hi in every coordinate", error_code="EMPTY_BOX",
                                  details={"lo": lo.tolist(), "hi": hi.tolist()})
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, low: float, high: float, dim: int) -> "Box":
        return cls(lo=np.full(dim, low), hi=np.full(dim, high))

    @property
    def dim(self) -> int:
        return self.lo.size

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(x >= self.lo) and np.all(x <= self.hi))

    def clip(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=np.float64), self.lo, self.hi)

    def axes(self, resolution: Union[int, Sequence[int]]) -> Tuple[np.ndarray, ...]:
        """Per-axis node coordinates, endpoints included."""
        counts = normalize_resolution(resolution, self.dim)
        return tuple(np.linspace(self.lo[i], self.hi[i], counts[i]) for i in range(self.dim))

    def lattice(self, resolution: Union[int, Sequence[int]]) -> np.ndarray:
        """All lattice points, row-major with the last axis fastest; shape (prod(res), dim)."""
        mesh = np.meshgrid(*self.axes(resolution), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)


def normalize_resolution(resolution: Union[int, Sequence[int]], dim: int) -> Tuple[int, ...]:
    if isinstance(resolution, (int, np.integer)):
        counts = (int(resolution),) * dim
    else:
        counts = tuple(int(r) for r in resolution)
    if len(counts) != dim:
        raise DimensionError(f"Resolution has {len(counts)} entries for a {dim}-D box", error_code="SHAPE_MISMATCH")
    if any(c < 2 for c in counts):
        raise ValidationError(f"Resolution must be >= 2 per axis, got {counts}", error_code="BAD_RESOLUTION")
    return counts


def default_resolution(dim: int) -> int:
    """Points per axis used for sup-norm sampling: dense in 1-2 D, coarser in 3-4 D."""
    if dim <= 2:
        return 201
    return 41 if dim <= 4 else 11
