"""
Marching squares on 2-D grid fields.
"""

from typing import List, Tuple

import numpy as np

from utils.core.exceptions import ValidationError
from .grid import GridDomain

Segment = Tuple[Tuple[float, float], Tuple[float, float]]

# Corner order: 0 = (i, j), 1 = (i+1, j), 2 = (i+1, j+1), 3 = (i, j+1).
# Edge e joins corners e and (e + 1) % 4. Index bit k is set when corner k is above c.
_EDGE_TABLE = {
    0: [], 15: [],
    1: [(3, 0)], 14: [(3, 0)],
    2: [(0, 1)], 13: [(0, 1)],
    3: [(3, 1)], 12: [(3, 1)],
    4: [(1, 2)], 11: [(1, 2)],
    6: [(0, 2)], 9: [(0, 2)],
    7: [(3, 2)], 8: [(3, 2)],
}
_CORNERS = ((0, 0), (1, 0), (1, 1), (0, 1))


def _lerp(p: np.ndarray, q: np.ndarray, fp: float, fq: float, c: float) -> np.ndarray:
    t = 0.5 if fq == fp else (c - fp) / (fq - fp)
    return p + t * (q - p)


def marching_squares(field: np.ndarray, grid: GridDomain, c: float) -> List[Segment]:
    """
    Line segments of the level set ``{f = c}`` in domain coordinates.

    Saddle cells (alternating corners) are resolved with the cell-centre average.
    """
    if grid.dim != 2:
        raise ValidationError("Contours need a 2-D grid", error_code="UNSUPPORTED_DIMENSION")
    field = np.asarray(field, dtype=np.float64)
    xs, ys = grid.axes()
    above = field > c
    segments: List[Segment] = []
    for i in range(field.shape[0] - 1):
        for j in range(field.shape[1] - 1):
            values = [field[i + di, j + dj] for di, dj in _CORNERS]
            index = sum(1 << k for k, (di, dj) in enumerate(_CORNERS) if above[i + di, j + dj])
            if index in (0, 15):
                continue
            if index in (5, 10):
                # saddle: the cell centre decides which pair of corners is cut off
                centre_above = float(np.mean(values)) > c
                if centre_above == (index == 5):
                    pairs = [(0, 1), (2, 3)]
                else:
                    pairs = [(3, 0), (1, 2)]
            else:
                pairs = _EDGE_TABLE[index]
            points = [np.array([xs[i + di], ys[j + dj]]) for di, dj in _CORNERS]
            for e1, e2 in pairs:
                p = _lerp(points[e1], points[(e1 + 1) % 4], values[e1], values[(e1 + 1) % 4], c)
                q = _lerp(points[e2], points[(e2 + 1) % 4], values[e2], values[(e2 + 1) % 4], c)
                segments.append(((float(p[0]), float(p[1])), (float(q[0]), float(q[1]))))
    return segments
