"""
Dense 64-bit linear algebra used by every analysis module.
"""

from .box import Box, default_resolution, normalize_resolution
from .linalg import (
    Vec64,
    Mat64,
    SpectralSummary,
    as_vec,
    as_mat,
    ensure_finite,
    inf_norm_vec,
    inf_norm_mat,
    singular_values,
    spectral_summary,
    solve_det_shift,
    affine_box_image,
)

__all__ = [
    "Box",
    "default_resolution",
    "normalize_resolution",
    "Vec64",
    "Mat64",
    "SpectralSummary",
    "as_vec",
    "as_mat",
    "ensure_finite",
    "inf_norm_vec",
    "inf_norm_mat",
    "singular_values",
    "spectral_summary",
    "solve_det_shift",
    "affine_box_image",
]
