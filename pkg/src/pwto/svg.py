"""Minimal SVG emitters: field heatmap with path / trajectory overlays."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .costfield import CostField, rasterize

__all__ = ["heatmap_svg", "overlay_svg"]

_SIZE = 600
_SEED_COLOR = "#1f77b4"
_TRAJ_COLOR = "#ff7f0e"
_BEST_COLOR = "#d62728"


def _color(t: float) -> str:
    """White (low cost) to dark green (high cost)."""
    t = min(max(t, 0.0), 1.0)
    lo = np.array([255, 255, 255])
    hi = np.array([0, 90, 50])
    r, g, b = (lo + (hi - lo) * t).astype(int)
    return f"#{r:02x}{g:02x}{b:02x}"


def _heat_rects(field: CostField, res: int) -> list[str]:
    vals = rasterize(field, res, res).values
    top = float(vals.max()) if vals.size and vals.max() > 0 else 1.0
    cell = _SIZE / res
    out = []
    for i in range(res):
        for j in range(res):
            x = i * cell
            y = _SIZE - (j + 1) * cell  # SVG y grows downward
            out.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{cell + 0.3:.2f}" height="{cell + 0.3:.2f}" fill="{_color(vals[i, j] / top)}"/>')
    return out


def _polyline(points, color: str, width: float, opacity: float = 1.0) -> str:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    coords = " ".join(f"{x * _SIZE:.2f},{(1 - y) * _SIZE:.2f}" for x, y in pts)
    return f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="{width}" stroke-opacity="{opacity}"/>'


def _document(body: list[str]) -> str:
    head = f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE}" height="{_SIZE}" viewBox="0 0 {_SIZE} {_SIZE}">'
    return "\n".join([head, *body, "</svg>", ""])


def heatmap_svg(path, field: CostField, res: int = 80) -> None:
    Path(path).write_text(_document(_heat_rects(field, res)))


def overlay_svg(path, field: CostField, seed_paths=(), trajectories=(), res: int = 80) -> None:
    """Heatmap plus seed polylines and ``(points, is_best)`` trajectory overlays."""
    body = _heat_rects(field, res)
    for pts in seed_paths:
        if len(pts):
            body.append(_polyline(pts, _SEED_COLOR, 1.5, 0.7))
    for pts, best in trajectories:
        body.append(_polyline(pts, _BEST_COLOR if best else _TRAJ_COLOR, 3.0 if best else 2.0))
    Path(path).write_text(_document(body))
