"""
Toy datasets: the 1-D quadratic regression and the 2-D circle / XOR classifications.

Classification labels follow the rule label = 1 iff Psi(x) > 0.5 with

    Psi_circ(x) = x1^2 + x2^2 - 0.5
    Psi_xor(x)  = x2^2 - x1^2 - 0.5

and points with |Psi(x) - 0.5| < band are redrawn so that no label sits on the
decision boundary.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd

from utils.core.exceptions import ValidationError
from utils.core.logging import get_project_logger
from utils.core.seeding import make_rng
from ..numerics import Box

logger = get_project_logger(__name__)

LABEL_THRESHOLD = 0.5
DEFAULT_BAND = 0.05


class DatasetKind(str, Enum):
    QUAD_1D = "Quad1D"
    CIRCLE_2D = "Circle2D"
    XOR_2D = "Xor2D"
    QUADRATIC = "Quadratic"

    @property
    def is_classification(self) -> bool:
        return self in (DatasetKind.CIRCLE_2D, DatasetKind.XOR_2D)


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    kind: DatasetKind
    domain: Box

    def __post_init__(self):
        if self.inputs.ndim != 2 or self.inputs.shape[0] != self.targets.shape[0]:
            raise ValidationError("Dataset needs (N, n) inputs and N targets", error_code="SHAPE_MISMATCH")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.inputs, columns=[f"x{i + 1}" for i in range(self.dim)])
        frame["label"] = self.targets
        return frame


def psi_circle(X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(X)
    return X[:, 0] ** 2 + X[:, 1] ** 2 - 0.5


def psi_xor(X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(X)
    return X[:, 1] ** 2 - X[:, 0] ** 2 - 0.5


def quadratic_target(z: Sequence[float]) -> Callable[[np.ndarray], np.ndarray]:
    """``Psi_z(x) = sum_j (x_j - z_j)^2`` as a batch function."""
    center = np.asarray(z, dtype=np.float64).reshape(-1)

    def psi(X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        if X.shape[1] != center.size:
            raise ValidationError(f"Points are {X.shape[1]}-D, target center is {center.size}-D",
                                  error_code="SHAPE_MISMATCH")
        return np.sum((X - center) ** 2, axis=1)

    return psi


def label_from_psi(values: np.ndarray) -> np.ndarray:
    return (np.asarray(values) > LABEL_THRESHOLD).astype(np.float64)


def _draw_labelled(rng: np.random.Generator, psi, n: int, domain: Box, band: float) -> np.ndarray:
    kept = []
    count = 0
    while count < n:
        candidates = rng.uniform(domain.lo, domain.hi, size=(2 * (n - count) + 16, domain.dim))
        candidates = candidates[np.abs(psi(candidates) - LABEL_THRESHOLD) >= band]
        kept.append(candidates)
        count += len(candidates)
    return np.vstack(kept)[:n]


def make_dataset(
    kind: DatasetKind,
    n: int,
    seed: int,
    band: float = DEFAULT_BAND,
    center: Optional[Sequence[float]] = None,
) -> Dataset:
    """
    Draw a dataset from the stream ``(seed, "dataset", kind)``.

    Args:
        kind (DatasetKind): Which dataset
        n (int): Number of points
        seed (int): Root seed
        band (float): Half-width of the excluded label band (classification)
        center (Optional[Sequence[float]]): Center z of the ``Quadratic`` target, defaults to 0 in 1-D

    Returns:
        Dataset: Inputs, targets and the sampling domain
    """
    kind = DatasetKind(kind)
    if n < 1:
        raise ValidationError(f"Dataset size must be >= 1, got {n}", error_code="BAD_SIZE")
    rng = make_rng(seed, "dataset", kind.value)

    if kind is DatasetKind.QUAD_1D:
        domain = Box.cube(-1.0, 1.0, 1)
        X = rng.uniform(-1.0, 1.0, size=(n, 1))
        y = X[:, 0] ** 2
    elif kind is DatasetKind.QUADRATIC:
        z = np.zeros(1) if center is None else np.asarray(center, dtype=np.float64)
        domain = Box.cube(-1.0, 1.0, z.size)
        X = rng.uniform(-1.0, 1.0, size=(n, z.size))
        y = quadratic_target(z)(X)
    else:
        domain = Box.cube(-2.5, 2.5, 2)
        psi = psi_circle if kind is DatasetKind.CIRCLE_2D else psi_xor
        X = _draw_labelled(rng, psi, n, domain, band)
        y = label_from_psi(psi(X))
        if y.min() == y.max():
            logger.warning(f"{kind.value} draw of {n} points contains a single class")
    return Dataset(inputs=X, targets=y, kind=kind, domain=domain)
