"""
Shared output components of the command-line pages: the artifact writer,
the run manifest, console summaries and SVG figures.
"""

import contextvars
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from backend.expressivity.topology import GridDomain, Segment
from utils import __version__
from utils.config.settings import get_runtime_settings
from utils.core.logging import get_project_logger

logger = get_project_logger(__name__)

SVG_SIZE = 480
MAX_FILL_CELLS = 100
SUB_COLOR = "#4F8BF9"
SUPER_COLOR = "#F39C12"
CONTOUR_COLOR = "#222222"

T = TypeVar("T")
R = TypeVar("R")


class RunManifest(BaseModel):
    """Everything needed to replay a run and find its files."""

    command: str
    version: str = __version__
    config_hash: str
    config: Dict[str, Any]
    seeds: List[int] = Field(default_factory=list)
    artifacts: List[str] = Field(default_factory=list, description="Paths relative to the run directory")
    status: str = "ok"
    created_at: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))


class ArtifactWriter:
    """
    Writes every artifact of a run from the calling thread and records it for
    the manifest. Workers return results; only the orchestrating thread writes.
    """

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.artifacts: List[str] = []

    def _target(self, name: str) -> Path:
        path = self.out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        self.artifacts.append(name)
        return path

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = self._target(name)
        frame.to_csv(path, index=False, float_format="%.17g")
        return path

    def write_json(self, name: str, report: BaseModel) -> Path:
        path = self._target(name)
        path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self._target(name)
        path.write_text(text, encoding="utf-8")
        return path

    def finish(self, manifest: RunManifest) -> Path:
        manifest = manifest.model_copy(update={"artifacts": sorted(self.artifacts)})
        path = self.out_dir / "manifest.json"
        path.write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
        logger.info(f"{manifest.command}: {len(manifest.artifacts)} artifact(s) in {self.out_dir}")
        return path


def print_summary(title: str, rows: Dict[str, Any], stream=None) -> None:
    """Human-readable key/value block on stdout."""
    stream = stream or sys.stdout
    width = max((len(key) for key in rows), default=0)
    print(f"== {title} ==", file=stream)
    for key, value in rows.items():
        if isinstance(value, float):
            value = f"{value:.6g}"
        print(f"  {key.ljust(width)}  {value}", file=stream)


def _to_canvas(grid: GridDomain, size: int = SVG_SIZE):
    lo, hi = grid.lo, grid.hi
    scale = size / np.max(hi - lo)

    def transform(x: float, y: float):
        # SVG y grows downwards
        return (x - lo[0]) * scale, size - (y - lo[1]) * scale

    return transform, (hi[0] - lo[0]) * scale, (hi[1] - lo[1]) * scale


def render_level_svg(
    field: np.ndarray,
    grid: GridDomain,
    c: float,
    segments: Sequence[Segment],
    points: Optional[np.ndarray] = None,
    labels: Optional[np.ndarray] = None,
    title: str = "",
) -> str:
    """
    Two-class fill by the sign of ``field - c`` with the level set ``{field = c}``
    stroked on top and optional labelled data points.
    """
    transform, width, height = _to_canvas(grid)
    xs, ys = grid.axes()
    stride = max(1, int(np.ceil(max(field.shape) / MAX_FILL_CELLS)))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height + 24:.0f}" '
        f'viewBox="0 -24 {width:.2f} {height + 24:.2f}">',
        f'<text x="4" y="-8" font-family="sans-serif" font-size="12">{title} (c = {c:.4g})</text>',
        '<g stroke="none">',
    ]
    for i in range(0, field.shape[0] - 1, stride):
        i2 = min(i + stride, field.shape[0] - 1)
        for j in range(0, field.shape[1] - 1, stride):
            j2 = min(j + stride, field.shape[1] - 1)
            x0, y1 = transform(xs[i], ys[j])
            x1, y0 = transform(xs[i2], ys[j2])
            color = SUPER_COLOR if float(np.mean(field[i:i2 + 1, j:j2 + 1])) > c else SUB_COLOR
            parts.append(f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{x1 - x0 + 0.3:.2f}" '
                         f'height="{y1 - y0 + 0.3:.2f}" fill="{color}" fill-opacity="0.55"/>')
    parts.append("</g>")
    parts.append(f'<g stroke="{CONTOUR_COLOR}" stroke-width="1.5" fill="none">')
    for (ax, ay), (bx, by) in segments:
        x0, y0 = transform(ax, ay)
        x1, y1 = transform(bx, by)
        parts.append(f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y1:.2f}"/>')
    parts.append("</g>")
    if points is not None:
        parts.append('<g stroke="white" stroke-width="0.4">')
        for (px, py), label in zip(points[:, :2], labels if labels is not None else np.zeros(len(points))):
            x, y = transform(px, py)
            color = SUPER_COLOR if label > 0.5 else SUB_COLOR
            parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2" fill="{color}"/>')
        parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts)


def render_curve_svg(
    xs: np.ndarray,
    curves: Dict[str, np.ndarray],
    level: Optional[float] = None,
    title: str = "",
) -> str:
    """Line plot of 1-D fields over a shared x axis, with an optional horizontal level."""
    colors = [SUB_COLOR, SUPER_COLOR, "#27AE60", "#8E44AD"]
    values = np.concatenate([np.asarray(v, dtype=np.float64) for v in curves.values()])
    if level is not None:
        values = np.append(values, level)
    y_lo, y_hi = float(values.min()), float(values.max())
    if y_hi - y_lo < 1e-12:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    size = SVG_SIZE

    def transform(x, y):
        return (x - xs[0]) / (xs[-1] - xs[0]) * size, size - (y - y_lo) / (y_hi - y_lo) * size

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size + 24}" '
        f'viewBox="0 -24 {size} {size + 24}">',
        f'<text x="4" y="-8" font-family="sans-serif" font-size="12">{title}</text>',
    ]
    if level is not None:
        _, y = transform(xs[0], level)
        parts.append(f'<line x1="0" y1="{y:.2f}" x2="{size}" y2="{y:.2f}" stroke="#999" stroke-dasharray="4 3"/>')
    for index, (name, ys) in enumerate(curves.items()):
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in (transform(a, b) for a, b in zip(xs, ys)))
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{colors[index % len(colors)]}" '
                     f'stroke-width="1.5"><title>{name}</title></polyline>')
    parts.append("</svg>")
    return "\n".join(parts)


def run_parallel(fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
    """Map ``fn`` over ``items`` on at most ``RESNETLAB_THREADS`` threads, results in input order."""
    threads = min(get_runtime_settings().threads, max(len(items), 1))
    if threads <= 1:
        return [fn(item) for item in items]
    # each task runs in a copy of the caller's context so run_context reaches worker log records
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(contextvars.copy_context().run, fn, item) for item in items]
        return [future.result() for future in futures]
