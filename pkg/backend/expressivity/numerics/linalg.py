"""
Dense linear algebra over 64-bit floats.

Vectors and matrices are plain ``numpy.float64`` arrays; the helpers here
validate shape and finiteness at the boundary so that NaN never travels
silently through the analysis code. Networks in this project have at most a
few dozen hidden units, so everything is dense and row-major.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import numpy.typing as npt

from utils.core.exceptions import DimensionError, NumericalError
from utils.core.logging import get_project_logger

logger = get_project_logger(__name__)

Vec64 = npt.NDArray[np.float64]
Mat64 = npt.NDArray[np.float64]


@dataclass(frozen=True)
class SpectralSummary:
    """Extreme singular values and |det| of a small matrix."""

    sigma_max: float
    sigma_min: float
    abs_det: float
    square: bool


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def as_vec(values, name: str = "vector", allow_empty: bool = False) -> Vec64:
    """Copy ``values`` into a read-only finite float64 vector."""
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if arr.size == 0 and not allow_empty:
        raise DimensionError(f"{name} must not be empty", error_code="EMPTY_VECTOR")
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{name} contains NaN or Inf", error_code="NON_FINITE",
                             details={"name": name})
    return _freeze(arr)


def as_mat(values, name: str = "matrix", shape: Tuple[int, int] = None) -> Mat64:
    """Copy ``values`` into a read-only finite float64 matrix (2-D)."""
    arr = np.array(values, dtype=np.float64)
    if arr.ndim == 1 and shape is not None:
        arr = arr.reshape(shape)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got ndim={arr.ndim}",
                             error_code="BAD_RANK")
    if shape is not None and arr.shape != tuple(shape):
        raise DimensionError(f"{name} has shape {arr.shape}, expected {tuple(shape)}",
                             error_code="SHAPE_MISMATCH")
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{name} contains NaN or Inf", error_code="NON_FINITE",
                             details={"name": name})
    return _freeze(arr)


def ensure_finite(arr: np.ndarray, what: str, **details) -> np.ndarray:
    """Raise NumericalError if ``arr`` has a NaN or Inf entry."""
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"Non-finite value in {what}", error_code="NON_FINITE",
                             details={"where": what, **details})
    return arr


def inf_norm_vec(v: Vec64) -> float:
    """Max-norm ``max_i |v_i|``."""
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise DimensionError("inf_norm_vec of an empty vector", error_code="EMPTY_VECTOR")
    ensure_finite(arr, "inf_norm_vec input")
    return float(np.max(np.abs(arr)))


def inf_norm_mat(A: Mat64) -> float:
    """Induced max-norm: the largest absolute row sum."""
    arr = np.asarray(A, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DimensionError(f"inf_norm_mat needs a non-degenerate matrix, got shape {arr.shape}",
                             error_code="DEGENERATE_MATRIX")
    ensure_finite(arr, "inf_norm_mat input")
    return float(np.max(np.sum(np.abs(arr), axis=1)))


def _lapack_singular_values(A: np.ndarray) -> np.ndarray:
    """Descending singular values from LAPACK, failures surfaced as NumericalError."""
    try:
        return np.linalg.svd(A, compute_uv=False)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"SVD did not converge: {e}", error_code="SVD_NO_CONVERGENCE",
                             details={"shape": list(A.shape)})


def singular_values(A: Mat64) -> Vec64:
    """All min(m, n) singular values in descending order."""
    arr = np.asarray(A, dtype=np.float64)
    if arr.ndim != 2 or 0 in arr.shape:
        raise DimensionError(f"singular_values needs a non-degenerate matrix, got shape {arr.shape}",
                             error_code="DEGENERATE_MATRIX")
    ensure_finite(arr, "singular_values input")
    return _lapack_singular_values(arr)


def spectral_summary(A: Mat64) -> SpectralSummary:
    """
    Largest and smallest singular value plus |det| (square input only).

    For non-square input ``abs_det`` is reported as 0 with ``square=False``.

    Raises:
        NumericalError: If the SVD does not converge
    """
    arr = np.asarray(A, dtype=np.float64)
    if arr.ndim != 2 or 0 in arr.shape:
        raise DimensionError(f"spectral_summary needs a non-degenerate matrix, got shape {arr.shape}",
                             error_code="DEGENERATE_MATRIX")
    ensure_finite(arr, "spectral_summary input")
    values = _lapack_singular_values(arr)
    square = arr.shape[0] == arr.shape[1]
    abs_det = float(np.prod(values)) if square else 0.0
    return SpectralSummary(
        sigma_max=float(np.max(values)),
        sigma_min=float(np.min(values)),
        abs_det=abs_det,
        square=square,
    )


def solve_det_shift(J: Mat64, s: float) -> float:
    """
    ``|det(J + s·Id)|`` through an LU factorisation with partial pivoting.

    A zero return means ``-s`` is an eigenvalue of ``J``.
    """
    arr = np.asarray(J, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise DimensionError(f"solve_det_shift needs a square matrix, got shape {arr.shape}",
                             error_code="NOT_SQUARE")
    ensure_finite(arr, "solve_det_shift input")
    shifted = arr + float(s) * np.eye(arr.shape[0])
    sign, logabsdet = np.linalg.slogdet(shifted)
    if sign == 0.0:
        return 0.0
    return float(np.exp(logabsdet))


def affine_box_image(A: Mat64, c: Vec64, lo: Vec64, hi: Vec64) -> Tuple[Vec64, Vec64]:
    """
    Exact componentwise range of ``x -> A x + c`` over the box ``[lo, hi]``.

    Infinite box edges propagate to infinite bounds.
    """
    A = np.asarray(A, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if A.shape[1] != lo.size or lo.shape != hi.shape:
        raise DimensionError(
            f"Box of dimension {lo.size} does not match matrix with {A.shape[1]} columns",
            error_code="SHAPE_MISMATCH",
        )
    mid = 0.5 * (lo + hi)
    rad = 0.5 * (hi - lo)
    with np.errstate(invalid="ignore"):
        center = A @ np.where(np.isfinite(mid), mid, 0.0) + np.asarray(c, dtype=np.float64)
        spread = np.abs(A) @ rad
    spread = np.where(np.isnan(spread), np.inf, spread)
    return center - spread, center + spread
