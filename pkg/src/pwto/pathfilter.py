"""Shape-diversity filtering of Pareto paths by Hausdorff distance."""

from __future__ import annotations

import numpy as np

from .mosearch import ParetoFront, ParetoPath

__all__ = ["hausdorff", "vertex_points", "filter_paths", "filter_mask"]


def vertex_points(path) -> np.ndarray:
    """Vertex positions in grid-cell units (lattice paths) or raw 2-D points."""
    verts = path.vertices if isinstance(path, ParetoPath) else path
    pts = [(v.ix, v.iy) if hasattr(v, "ix") else tuple(v)[:2] for v in verts]
    return np.asarray(pts, dtype=float).reshape(-1, 2)


def hausdorff(p1, p2) -> float:
    """Symmetric Hausdorff distance between the vertex point sets of two paths."""
    a, b = vertex_points(p1), vertex_points(p2)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("Hausdorff distance needs non-empty paths")
    return _hausdorff_points(a, b)


def _hausdorff_points(a: np.ndarray, b: np.ndarray) -> float:
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1))
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def filter_mask(front, d_thres: float, weight: float = 0.5) -> list[bool]:
    """Greedy keep/drop flags in front order; see :func:`filter_paths`."""
    if not d_thres > 0:
        raise ValueError("d_thres must be positive")
    entries = list(front.entries if isinstance(front, ParetoFront) else front)
    pts = [vertex_points(p) for p in entries]
    if any(len(p) == 0 for p in pts):
        raise ValueError("Hausdorff distance needs non-empty paths")
    order = sorted(range(len(entries)), key=lambda i: (entries[i].scalarized(weight), i))
    kept: list[int] = []
    for i in order:
        if all(_hausdorff_points(pts[i], pts[j]) > d_thres for j in kept):
            kept.append(i)
    keep = set(kept)
    return [i in keep for i in range(len(entries))]


def filter_paths(front, d_thres: float, weight: float = 0.5) -> list[ParetoPath]:
    """Cheapest-first greedy subset whose pairwise Hausdorff distances exceed ``d_thres``.

    Paths are visited by ascending ``weight * c1 + (1 - weight) * c2`` and a
    path is kept iff it is farther than ``d_thres`` from every path kept so far.
    The result is returned in that visiting order.
    """
    entries = list(front.entries if isinstance(front, ParetoFront) else front)
    mask = filter_mask(entries, d_thres, weight)
    order = sorted(range(len(entries)), key=lambda i: (entries[i].scalarized(weight), i))
    return [entries[i] for i in order if mask[i]]
