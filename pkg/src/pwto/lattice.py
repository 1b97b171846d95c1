"""SE(2) state lattice with first-order unicycle motion primitives.

Vertices sit at grid-cell centers ``((ix + 0.5) * cell, (iy + 0.5) * cell)``
with heading ``2 pi ih / nh``. Every edge carries a two-component cost:
traversal time and the time integral of the cost field along the primitive.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .costfield import CostField

__all__ = [
    "LatticeVertex",
    "MotionPrimitive",
    "CostVector",
    "Lattice",
    "build_primitive_set",
    "dump_primitives",
    "DEFAULT_COST_SCALE",
]

DEFAULT_COST_SCALE = 1e5


@dataclass(frozen=True, order=True)
class LatticeVertex:
    ix: int
    iy: int
    ih: int


@dataclass(frozen=True)
class CostVector:
    c1: float
    c2: float

    def __iter__(self):
        yield self.c1
        yield self.c2


@dataclass(frozen=True)
class MotionPrimitive:
    """A constant-control move valid from heading bin ``start_heading``.

    ``samples`` is an (S, 3) array of poses relative to the source vertex
    position (heading is absolute), both endpoints included.
    """

    start_heading: int
    delta: tuple[int, int, int]
    control: tuple[float, float]
    duration: float
    samples: np.ndarray
    kind: str = ""

    def to_dict(self) -> dict:
        return {
            "start_heading": self.start_heading,
            "kind": self.kind,
            "delta": list(self.delta),
            "control": list(self.control),
            "duration": self.duration,
            "samples": self.samples.tolist(),
        }


def _rollout(theta0: float, v: float, w: float, duration: float, n: int) -> np.ndarray:
    t = np.linspace(0.0, duration, n)
    th = theta0 + w * t
    if abs(w) < 1e-12:
        x = v * t * math.cos(theta0)
        y = v * t * math.sin(theta0)
    else:
        x = (v / w) * (np.sin(th) - math.sin(theta0))
        y = -(v / w) * (np.cos(th) - math.cos(theta0))
    return np.column_stack([x, y, th])


def _forward_delta(theta: float, reach: int = 2) -> tuple[int, int]:
    """Smallest integer cell step whose direction best matches ``theta``."""
    best = None
    for dx in range(-reach, reach + 1):
        for dy in range(-reach, reach + 1):
            if dx == 0 and dy == 0 or math.gcd(dx, dy) != 1:
                continue
            err = abs(math.remainder(math.atan2(dy, dx) - theta, 2 * math.pi))
            key = (round(err, 9), dx * dx + dy * dy)
            if best is None or key < best[0]:
                best = (key, (dx, dy))
    return best[1]


def build_primitive_set(
    nh: int = 4,
    cell: float = 1 / 200,
    v_max: float = 0.05,
    w_max: float = 1.57,
    n_samples: int = 48,
) -> list[MotionPrimitive]:
    """Primitives for every start heading.

    With four headings each vertex gets: one cell forward at ``v_max``, left
    and right quarter arcs to the diagonal neighbour, and in-place rotations by
    one heading bin at ``w_max``. With 8 or 16 headings the arcs are replaced
    by forward moves to the closest lattice direction (no arcs).
    """
    if nh not in (4, 8, 16):
        raise ValueError(f"unsupported heading count {nh}; use 4, 8 or 16")
    if cell <= 0 or v_max <= 0 or w_max <= 0:
        raise ValueError("cell, v_max and w_max must be positive")
    if n_samples < 12:
        raise ValueError("need at least 10 interior samples per primitive")
    bin_w = 2 * math.pi / nh
    prims: list[MotionPrimitive] = []
    for ih in range(nh):
        th = ih * bin_w
        dx, dy = _forward_delta(th)
        length = math.hypot(dx, dy) * cell
        dur = length / v_max
        prims.append(
            MotionPrimitive(ih, (dx, dy, 0), (v_max, 0.0), dur, _rollout(th, v_max, 0.0, dur, n_samples), "forward")
        )
        if nh == 4:
            # quarter circle of radius one cell; speed capped by the turn-rate limit
            v = min(v_max, w_max * cell)
            w = v / cell
            dur = (math.pi / 2) / w
            for sgn, name in ((1, "arc_left"), (-1, "arc_right")):
                s = _rollout(th, v, sgn * w, dur, n_samples)
                ddx = round(s[-1, 0] / cell)
                ddy = round(s[-1, 1] / cell)
                prims.append(MotionPrimitive(ih, (ddx, ddy, sgn), (v, sgn * w), dur, s, name))
        dur = bin_w / w_max
        for sgn, name in ((1, "rotate_left"), (-1, "rotate_right")):
            prims.append(
                MotionPrimitive(ih, (0, 0, sgn), (0.0, sgn * w_max), dur, _rollout(th, 0.0, sgn * w_max, dur, n_samples), name)
            )
    return prims


def dump_primitives(prims, path) -> None:
    Path(path).write_text(json.dumps([p.to_dict() for p in prims], indent=1))


class Lattice:
    """Implicit state lattice over a cost field.

    Edge costs for the whole lattice are computed once (vectorized) on first
    use; afterwards ``successors`` is a pure lookup. Integer costs for the
    search layer are the float costs times ``cost_scale``, rounded.
    """

    def __init__(
        self,
        field: CostField,
        nx: int = 200,
        ny: int = 200,
        nh: int = 4,
        v_max: float = 0.05,
        w_max: float = 1.57,
        n_samples: int = 48,
        cost_scale: float = DEFAULT_COST_SCALE,
    ):
        if nx < 1 or ny < 1:
            raise ValueError("lattice dimensions must be positive")
        self.field = field
        self.nx, self.ny, self.nh = nx, ny, nh
        self.cell = 1.0 / max(nx, ny)
        self.v_max, self.w_max = v_max, w_max
        self.cost_scale = cost_scale
        self.primitives = build_primitive_set(nh, self.cell, v_max, w_max, n_samples)
        self._by_heading = [[k for k, p in enumerate(self.primitives) if p.start_heading == ih] for ih in range(nh)]
        self._graph = None

    # -- geometry -------------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return self.nx * self.ny * self.nh

    def vertex_id(self, v: LatticeVertex) -> int:
        return (v.ix * self.ny + v.iy) * self.nh + v.ih

    def vertex_of(self, vid: int) -> LatticeVertex:
        rest, ih = divmod(int(vid), self.nh)
        ix, iy = divmod(rest, self.ny)
        return LatticeVertex(ix, iy, ih)

    def in_bounds(self, v: LatticeVertex) -> bool:
        return 0 <= v.ix < self.nx and 0 <= v.iy < self.ny and 0 <= v.ih < self.nh

    def position(self, v: LatticeVertex) -> tuple[float, float]:
        return ((v.ix + 0.5) * self.cell, (v.iy + 0.5) * self.cell)

    def pose(self, v: LatticeVertex) -> tuple[float, float, float]:
        x, y = self.position(v)
        return x, y, 2 * math.pi * v.ih / self.nh

    def snap(self, p) -> LatticeVertex:
        """Nearest vertex to pose ``(x, y[, theta])``; ties go to smaller indices."""
        x, y = float(p[0]), float(p[1])
        th = float(p[2]) if len(p) > 2 else 0.0
        if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0) or not math.isfinite(th):
            raise ValueError(f"pose {tuple(p)} is outside the workspace")

        def nearest(t: float, n: int) -> int:
            return min(max(math.ceil(t - 0.5), 0), n - 1)

        ix = nearest(x / self.cell - 0.5, self.nx)
        iy = nearest(y / self.cell - 0.5, self.ny)
        a = (th / (2 * math.pi) * self.nh) % self.nh
        ih = math.ceil(a - 0.5)
        if ih >= self.nh or a == self.nh - 0.5:
            # wrapped past the last bin, or tied between the last bin and bin 0
            ih = 0
        return LatticeVertex(ix, iy, ih)

    # -- edges ----------------------------------------------------------------

    def _edge_tables(self):
        """Per primitive: valid-source mask and float (c1, c2) over the grid."""
        cell = self.cell
        xs = (np.arange(self.nx) + 0.5) * cell
        ys = (np.arange(self.ny) + 0.5) * cell
        tables = []
        grid_vals = None
        for prim in self.primitives:
            dx, dy, _ = prim.delta
            ok = np.zeros((self.nx, self.ny), dtype=bool)
            ok[max(0, -dx) : self.nx - max(0, dx), max(0, -dy) : self.ny - max(0, dy)] = True
            n = len(prim.samples)
            dt = prim.duration / (n - 1)
            offs = prim.samples[:-1, :2]
            if np.allclose(offs, 0.0):
                if grid_vals is None:
                    grid_vals = self.field.eval_grid(xs, ys)
                c2 = grid_vals * dt * (n - 1)
            else:
                c2 = np.zeros(ok.shape)
                if len(self.field):
                    for ox, oy in offs:
                        c2 += self.field.eval_grid(xs + ox, ys + oy)
                c2 *= dt
            tables.append((ok, prim.duration, c2))
        return tables

    def graph(self):
        """The lattice as a :class:`~pwto.mosearch.VectorGraph` with integer costs."""
        if self._graph is None:
            from .mosearch import VectorGraph

            src, dst, c1, c2, prim_ix = [], [], [], [], []
            ixg, iyg = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="ij")
            for k, (ok, dur, c2tab) in enumerate(self._edge_tables()):
                prim = self.primitives[k]
                dx, dy, dh = prim.delta
                sx, sy = ixg[ok], iyg[ok]
                s_id = (sx * self.ny + sy) * self.nh + prim.start_heading
                d_id = ((sx + dx) * self.ny + (sy + dy)) * self.nh + (prim.start_heading + dh) % self.nh
                src.append(s_id)
                dst.append(d_id)
                c1.append(np.full(len(s_id), round(dur * self.cost_scale), dtype=np.int64))
                c2.append(np.rint(c2tab[ok] * self.cost_scale).astype(np.int64))
                prim_ix.append(np.full(len(s_id), k, dtype=np.int64))
            self._graph = VectorGraph.from_arrays(
                self.n_vertices,
                np.concatenate(src),
                np.concatenate(dst),
                np.column_stack([np.concatenate(c1), np.concatenate(c2)]),
                edge_data=np.concatenate(prim_ix),
            )
        return self._graph

    def successors(self, v: LatticeVertex) -> list[tuple[LatticeVertex, CostVector]]:
        """Neighbours of ``v`` with float (unscaled) edge costs."""
        if not self.in_bounds(v):
            raise ValueError(f"vertex {v} out of bounds")
        x0, y0 = self.position(v)
        out = []
        for k in self._by_heading[v.ih]:
            prim = self.primitives[k]
            dx, dy, dh = prim.delta
            w = LatticeVertex(v.ix + dx, v.iy + dy, (v.ih + dh) % self.nh)
            if not (0 <= w.ix < self.nx and 0 <= w.iy < self.ny):
                continue
            out.append((w, CostVector(prim.duration, self.edge_field_cost(prim, (x0, y0)))))
        return out

    def edge_field_cost(self, prim: MotionPrimitive, origin) -> float:
        """Left Riemann sum of the field along ``prim`` started at ``origin``."""
        n = len(prim.samples)
        pts = prim.samples[:-1, :2] + np.asarray(origin, dtype=float)
        if not len(self.field):
            return 0.0
        return float(np.sum(self.field.eval(pts)) * prim.duration / (n - 1))

    def edge_polyline(self, v: LatticeVertex, prim_index: int) -> np.ndarray:
        """Absolute (x, y) samples of primitive ``prim_index`` applied at ``v``."""
        prim = self.primitives[prim_index]
        return prim.samples[:, :2] + np.asarray(self.position(v))
