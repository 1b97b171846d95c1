"""Single-start baselines and the cost-ratio benchmark harness.

Each baseline builds one warm start (straight line, random waypoints, or the
scalarized A* lattice path), transcribes it with the same weights as the
multi-start planner and runs one optimization process for a fixed budget.
"""

from __future__ import annotations

import csv
import heapq
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .costfield import CostField
from .dircol import BOUNDS, StateBounds, Trajectory, WeightConfig, _kinematic_fill, path_to_guess, polyline_to_guess, step, transcribe
from .lattice import Lattice
from .mosearch import ParetoPath, _make_path, reverse_distances
from .scheduler import RunConfig, UnreachableError, run_pwto

__all__ = [
    "KINDS",
    "BaselineResult",
    "Instance",
    "line_guess",
    "random_guess",
    "astar_guess",
    "run_baseline",
    "sample_instances",
    "run_benchmark",
    "cost_ratio_table",
    "write_manifest",
    "write_cr_table",
    "TABLE_FIELDS",
    "MANIFEST_SCHEMA",
]

KINDS = ("LINE", "RAND", "ASTAR")

# (sigma, M) of the three standard benchmark fields
TABLE_FIELDS = ((0.002, 15), (0.012, 20), (0.001, 30))

STATIONARY_T = 1.0  # horizon of the guess when start and goal coincide


def _stationary(x, n_nodes: int) -> Trajectory:
    states = np.tile(np.asarray(x, dtype=float), (n_nodes, 1))
    states[:, 3:] = 0.0
    return Trajectory(states, np.zeros((n_nodes, 2)), STATIONARY_T)


def line_guess(x_init, x_goal, n_nodes: int = 100, v_nominal: float = 0.04, bounds: StateBounds = BOUNDS) -> Trajectory:
    """Straight segment from start to goal at constant nominal speed."""
    a = np.asarray(x_init[:2], dtype=float)
    b = np.asarray(x_goal[:2], dtype=float)
    if np.array_equal(a, b):
        raise ValueError("line guess needs distinct start and goal positions")
    return polyline_to_guess(np.vstack([a, b]), n_nodes, v_nominal, bounds)


def random_guess(x_init, x_goal, n_nodes: int = 100, seed: int = 0, v_nominal: float = 0.04,
                 bounds: StateBounds = BOUNDS) -> Trajectory:
    """Uniform random interior waypoints with pinned endpoints.

    The horizon is the straight-line distance over the nominal speed, so the
    horizon bounds of the transcription bracket a sensible travel time.
    """
    rng = np.random.default_rng(seed)
    pos = rng.uniform(0.0, 1.0, size=(n_nodes, 2))
    pos[0] = x_init[:2]
    pos[-1] = x_goal[:2]
    dist = float(np.hypot(*(pos[-1] - pos[0])))
    T = dist / v_nominal if dist > 0 else STATIONARY_T
    return _kinematic_fill(pos, T, bounds)


def astar_guess(lattice: Lattice, field: CostField | None, v_init, v_goal, weight: float = 0.5) -> ParetoPath:
    """Optimal lattice path under ``weight * c1 + (1 - weight) * c2``.

    The heuristic is the same combination of the exact per-objective
    reverse-Dijkstra distances. Labels are ordered by ``(f, FIFO)`` and a
    vertex is closed the first time it is popped, which mirrors the tie
    handling of the multi-objective search. ``field`` is accepted for
    interface symmetry; the lattice already carries it.
    """
    if field is not None and field is not lattice.field:
        raise ValueError("field does not match the lattice's field")
    g = lattice.graph()
    s, t = lattice.vertex_id(v_init), lattice.vertex_id(v_goal)
    h = reverse_distances(g, t)
    if not np.isfinite(h[s, 0]):
        raise UnreachableError(f"{v_goal} is unreachable from {v_init}")
    hs = (weight * h[:, 0] + (1 - weight) * h[:, 1]).tolist()
    adj = g.adjacency()
    closed = bytearray(g.n)
    lab_v, lab_parent, lab_edge = [s], [-1], [-1]
    lab_g = [(0, 0)]
    heap = [(hs[s], 0, 0)]
    counter = 1
    while heap:
        _, _, lid = heapq.heappop(heap)
        v = lab_v[lid]
        if closed[v]:
            continue
        closed[v] = 1
        if v == t:
            vids, edges = [], []
            cost = lab_g[lid]
            while lid >= 0:
                vids.append(lab_v[lid])
                if lab_edge[lid] >= 0:
                    edges.append(lab_edge[lid])
                lid = lab_parent[lid]
            return _make_path(g, vids[::-1], edges[::-1], cost, lattice)
        g1, g2 = lab_g[lid]
        for w, c1, c2, e in adj[v]:
            if closed[w]:
                continue
            n1, n2 = g1 + c1, g2 + c2
            lab_v.append(w)
            lab_parent.append(lid)
            lab_edge.append(e)
            lab_g.append((n1, n2))
            heapq.heappush(heap, (weight * n1 + (1 - weight) * n2 + hs[w], counter, len(lab_v) - 1))
            counter += 1
    raise UnreachableError(f"{v_goal} is unreachable from {v_init}")


@dataclass
class BaselineResult:
    kind: str
    J: float | None
    converged: bool
    iterations: int
    failed: bool = False
    trajectory: Trajectory | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"J": self.J, "converged": self.converged, "iterations": self.iterations, "failed": self.failed}


def run_baseline(kind: str, field: CostField, x_init, x_goal, budget: int = 1000, cfg: RunConfig | None = None,
                 lattice: Lattice | None = None, seed: int = 0) -> BaselineResult:
    """One optimization process from a baseline warm start, for at most ``budget`` iterations."""
    kind = kind.upper()
    if kind not in KINDS:
        raise ValueError(f"unknown baseline {kind!r}; expected one of {KINDS}")
    if budget < 0:
        raise ValueError("budget must be non-negative")
    cfg = cfg or RunConfig()
    x_init = np.asarray(x_init, dtype=float)
    x_goal = np.asarray(x_goal, dtype=float)
    same = np.array_equal(x_init[:2], x_goal[:2])
    if kind == "LINE":
        guess = _stationary(x_init, cfg.n_nodes) if same else line_guess(x_init, x_goal, cfg.n_nodes, cfg.v_nominal, cfg.bounds)
    elif kind == "RAND":
        guess = random_guess(x_init, x_goal, cfg.n_nodes, seed, cfg.v_nominal, cfg.bounds)
    else:
        lat = lattice if lattice is not None else cfg.lattice_for(field)
        v0, v1 = lat.snap(x_init[:3]), lat.snap(x_goal[:3])
        if v0 == v1:
            guess = _stationary(x_init, cfg.n_nodes)
        else:
            guess = path_to_guess(astar_guess(lat, None, v0, v1, cfg.scalarize_weight), cfg.n_nodes, cfg.v_nominal, cfg.bounds)
    p = transcribe(guess, field, cfg.weights, x_init, x_goal, cfg.bounds, label=kind)
    if not p.failed:
        step(p, budget)
    return BaselineResult(
        kind,
        p.cost if p.converged else None,
        p.converged,
        p.iterations_done,
        p.failed,
        p.trajectory if p.converged else None,
    )


# -- benchmark -----------------------------------------------------------------------


@dataclass
class Instance:
    field_id: int
    index: int
    start: tuple[float, float, float]
    goal: tuple[float, float, float]

    def states(self):
        x0 = np.array([*self.start, 0.0, 0.0])
        x1 = np.array([*self.goal, 0.0, 0.0])
        return x0, x1


def sample_instances(n: int, seed: int, field_id: int = 0, min_dist: float = 0.3) -> list[Instance]:
    """Uniform start/goal pairs at least ``min_dist`` apart.

    Both headings are set to the start-to-goal bearing (wrapped to [0, 2 pi)).
    """
    rng = np.random.default_rng([seed, field_id])
    out = []
    while len(out) < n:
        a, b = rng.uniform(0.0, 1.0, size=(2, 2))
        if np.hypot(*(b - a)) < min_dist:
            continue
        th = math.atan2(b[1] - a[1], b[0] - a[0]) % (2 * math.pi)
        out.append(Instance(field_id, len(out), (float(a[0]), float(a[1]), th), (float(b[0]), float(b[1]), th)))
    return out


def _bench_instance(cf: CostField, inst: Instance, cfg: RunConfig, budget: int, kinds, seed: int,
                    lattice: Lattice | None = None) -> dict:
    lat = lattice if lattice is not None else cfg.lattice_for(cf)
    x0, x1 = inst.states()
    t0 = time.perf_counter()
    methods = {}
    try:
        rep = run_pwto(cf, x0, x1, cfg, lattice=lat, workers=1)
        methods["PWTO"] = {
            "J": rep.c_min if rep.has_solution else None,
            "converged": rep.has_solution,
            "iterations": max(rep.iterations.values(), default=0),
            "n_processes": len(rep.iterations),
            "events": len(rep.events),
        }
    except (UnreachableError, ValueError) as exc:
        methods["PWTO"] = {"J": None, "converged": False, "iterations": 0, "error": str(exc)}
    for kind in kinds:
        res = run_baseline(kind, cf, x0, x1, budget, cfg, lattice=lat, seed=seed * 1000 + inst.index)
        methods[kind] = res.to_dict()
    return {
        "field_id": inst.field_id,
        "instance": inst.index,
        "start": list(inst.start),
        "goal": list(inst.goal),
        "methods": methods,
        "seconds": time.perf_counter() - t0,
    }


def run_benchmark(fields: list[CostField], n_instances: int, seed: int, cfg: RunConfig | None = None,
                  budget: int = 1000, kinds=KINDS, progress=None, workers: int = 1) -> dict:
    """PWTO plus every baseline on ``n_instances`` sampled pairs per field.

    With ``workers > 1`` instances run in a process pool; rows are still
    returned in (field, instance) order, so the manifest does not depend on
    the worker count apart from timings.
    """
    cfg = cfg or RunConfig()
    jobs = [(cf, inst) for fid, cf in enumerate(fields) for inst in sample_instances(n_instances, seed, fid)]
    rows = []
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            futs = [pool.submit(_bench_instance, cf, inst, cfg, budget, kinds, seed) for cf, inst in jobs]
            for fut in futs:
                rows.append(fut.result())
                if progress is not None:
                    progress(rows[-1])
    else:
        lattices: dict[int, Lattice] = {}
        for cf, inst in jobs:
            if inst.field_id not in lattices:
                lattices.clear()  # one field at a time keeps memory bounded
                lattices[inst.field_id] = cfg.lattice_for(cf)
            rows.append(_bench_instance(cf, inst, cfg, budget, kinds, seed, lattices[inst.field_id]))
            if progress is not None:
                progress(rows[-1])
    return {
        "seed": seed,
        "n_instances": n_instances,
        "budget": budget,
        "fields": [cf.to_dict() for cf in fields],
        "instances": rows,
    }


def cost_ratio_table(manifest: dict, kinds=KINDS) -> list[dict]:
    """Per field: fractions of instances with CR > 1, CR > 2 and baseline failure.

    CR = J_baseline / J_pwto is formed only where both converged; the CR
    fractions use that count as denominator. ``fail`` is the fraction of all
    instances whose baseline did not converge within the budget.
    """
    by_field: dict[int, list[dict]] = {}
    for row in manifest["instances"]:
        by_field.setdefault(row["field_id"], []).append(row)
    table = []
    for fid in sorted(by_field):
        rows = by_field[fid]
        entry = {"field_id": fid, "n": len(rows), "pwto_converged": sum(r["methods"]["PWTO"]["converged"] for r in rows)}
        fdict = manifest["fields"][fid] if fid < len(manifest.get("fields", [])) else None
        if fdict is not None and fdict["components"]:
            entry["sigma"] = fdict["components"][0]["sigma"]
            entry["M"] = len(fdict["components"])
        for kind in kinds:
            crs = []
            fails = 0
            for r in rows:
                b = r["methods"][kind]
                p = r["methods"]["PWTO"]
                if not b["converged"]:
                    fails += 1
                elif p["converged"]:
                    crs.append(b["J"] / p["J"] if p["J"] > 0 else math.inf)
            k = kind.lower()
            entry[f"{k}_n_cr"] = len(crs)
            entry[f"{k}_cr_gt1"] = (sum(c > 1 for c in crs) / len(crs)) if crs else None
            entry[f"{k}_cr_gt2"] = (sum(c > 2 for c in crs) / len(crs)) if crs else None
            entry[f"{k}_fail"] = fails / len(rows)
        table.append(entry)
    return table


_method = {
    "type": "object",
    "required": ["J", "converged", "iterations"],
    "properties": {
        "J": {"type": ["number", "null"]},
        "converged": {"type": "boolean"},
        "iterations": {"type": "integer", "minimum": 0},
    },
}
MANIFEST_SCHEMA = {
    "type": "object",
    "required": ["seed", "n_instances", "budget", "fields", "instances"],
    "properties": {
        "seed": {"type": "integer"},
        "n_instances": {"type": "integer", "minimum": 0},
        "budget": {"type": "integer", "minimum": 0},
        "fields": {"type": "array"},
        "instances": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["field_id", "instance", "start", "goal", "methods"],
                "properties": {
                    "field_id": {"type": "integer", "minimum": 0},
                    "instance": {"type": "integer", "minimum": 0},
                    "start": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
                    "goal": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
                    "methods": {"type": "object", "required": ["PWTO"], "additionalProperties": _method},
                },
            },
        },
    },
}


def write_manifest(manifest: dict, path) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2))


def write_cr_table(table: list[dict], path) -> None:
    cols = list(dict.fromkeys(k for row in table for k in row))
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for row in table:
            w.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in cols})
