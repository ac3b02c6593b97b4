"""
Uniform grids on compact boxes and batched field evaluation.
"""

from dataclasses import dataclass
from typing import Callable, Sequence, Tuple, Union

import numpy as np

from utils.core.exceptions import NumericalError, ValidationError
from ..models import ResNetModel, evaluate
from ..numerics import Box, normalize_resolution

ScalarField = Callable[[np.ndarray], np.ndarray]

EVAL_CHUNK = 16384


@dataclass(frozen=True)
class GridDomain:
    """Lattice with ``resolution[i]`` nodes along axis i, endpoints included."""

    box: Box
    resolution: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "resolution", normalize_resolution(self.resolution, self.box.dim))

    @classmethod
    def from_bounds(cls, lo: Sequence[float], hi: Sequence[float], resolution: Union[int, Sequence[int]]) -> "GridDomain":
        box = Box(lo=np.asarray(lo, dtype=np.float64), hi=np.asarray(hi, dtype=np.float64))
        return cls(box=box, resolution=normalize_resolution(resolution, box.dim))

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.resolution

    @property
    def size(self) -> int:
        return int(np.prod(self.resolution))

    @property
    def lo(self) -> np.ndarray:
        return self.box.lo

    @property
    def hi(self) -> np.ndarray:
        return self.box.hi

    def axes(self) -> Tuple[np.ndarray, ...]:
        return self.box.axes(self.resolution)

    def points(self) -> np.ndarray:
        return self.box.lattice(self.resolution)

    def spacing(self) -> np.ndarray:
        return (self.hi - self.lo) / (np.asarray(self.resolution) - 1)

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for axis in range(self.dim):
            index = [slice(None)] * self.dim
            index[axis] = 0
            mask[tuple(index)] = True
            index[axis] = -1
            mask[tuple(index)] = True
        return mask


def as_scalar_field(f: Union[ResNetModel, ScalarField], output_index: int = 0) -> ScalarField:
    if isinstance(f, ResNetModel):
        return lambda X: evaluate(f, X)[:, output_index]
    return f


def evaluate_grid(f: Union[ResNetModel, ScalarField], grid: GridDomain) -> np.ndarray:
    """
    Values of a scalar evaluator at every lattice point, shaped like the grid.

    ``f`` receives batches of points (rows) and returns one value per row.

    Raises:
        NumericalError: If a value is NaN or Inf (reports the lattice index)
    """
    field = as_scalar_field(f)
    points = grid.points()
    values = np.empty(len(points))
    for start in range(0, len(points), EVAL_CHUNK):
        chunk = np.asarray(field(points[start:start + EVAL_CHUNK]), dtype=np.float64).reshape(-1)
        if chunk.size != min(EVAL_CHUNK, len(points) - start):
            raise ValidationError("Evaluator must return one value per point", error_code="NON_SCALAR_FIELD")
        values[start:start + chunk.size] = chunk
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        index = tuple(int(i) for i in np.unravel_index(bad[0], grid.shape))
        raise NumericalError(f"Non-finite field value at lattice index {index}", error_code="NON_FINITE",
                             details={"index": list(index), "point": points[bad[0]].tolist()})
    return values.reshape(grid.shape)
