"""Round-robin orchestration of warm-started optimization processes.

Pipeline: lattice -> multi-objective search -> Hausdorff filter -> one
optimization process per kept path -> episodes in which every live process
is advanced by ``k`` iterations. A process that converges is retired and
reported only if it beats the best cost reported so far, which makes the
reported stream an anytime, strictly improving sequence.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .costfield import CostField
from .dircol import BOUNDS, OptProcess, StateBounds, Trajectory, WeightConfig, path_to_guess, save_trajectory, step, transcribe
from .lattice import Lattice
from .mosearch import ParetoFront, ParetoPath, moa_star
from .pathfilter import filter_paths

__all__ = [
    "RunConfig",
    "RunReport",
    "ReportEvent",
    "AnytimePoint",
    "UnreachableError",
    "run_pwto",
    "anytime_stream",
    "plan_seeds",
    "REPORT_SCHEMA",
    "WORKERS_ENV",
]

WORKERS_ENV = "PWTO_WORKERS"


class UnreachableError(RuntimeError):
    """The goal vertex cannot be reached from the start vertex in the lattice."""


@dataclass
class RunConfig:
    n_episode: int = 10
    k: int = 100
    d_h_thres: float = 8.0
    weights: WeightConfig = field(default_factory=WeightConfig)
    n_nodes: int = 100
    v_nominal: float = 0.04
    nx: int = 200
    ny: int = 200
    nh: int = 4
    v_max: float = 0.05
    w_max: float = 1.57
    scalarize_weight: float = 0.5
    max_processes: int | None = None
    workers: int = 1
    bounds: StateBounds = BOUNDS

    def __post_init__(self):
        if self.n_episode < 1 or self.k < 1:
            raise ValueError("n_episode and k must be at least 1")
        if self.n_nodes < 2:
            raise ValueError("n_nodes must be at least 2")
        if self.d_h_thres <= 0:
            raise ValueError("d_h_thres must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = self.weights.to_dict()
        d["bounds"] = {k: list(v) for k, v in asdict(self.bounds).items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        if "weights" in d:
            d["weights"] = WeightConfig.from_dict(d["weights"])
        if "bounds" in d:
            d["bounds"] = StateBounds(**{k: tuple(v) for k, v in d["bounds"].items()})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def lattice_for(self, cf: CostField) -> Lattice:
        return Lattice(cf, self.nx, self.ny, self.nh, self.v_max, self.w_max)


@dataclass
class ReportEvent:
    episode: int
    process: int
    J: float
    time: float
    iterations: int


@dataclass
class RunReport:
    events: list[ReportEvent] = field(default_factory=list)
    c_min: float = math.inf
    iterations: dict[int, int] = field(default_factory=dict)
    status: dict[int, str] = field(default_factory=dict)
    costs: dict[int, float] = field(default_factory=dict)
    seed_costs: dict[int, tuple[float, float]] = field(default_factory=dict)
    solutions: dict[int, Trajectory] = field(default_factory=dict)
    converged_episode: dict[int, int] = field(default_factory=dict)
    seeds: list[ParetoPath] = field(default_factory=list)
    front_size: int = 0
    timings: dict[str, float] = field(default_factory=dict)
    episodes_run: int = 0

    @property
    def has_solution(self) -> bool:
        return bool(self.events)

    @property
    def best_process(self) -> int | None:
        return self.events[-1].process if self.events else None

    @property
    def best_trajectory(self) -> Trajectory | None:
        return self.solutions[self.best_process] if self.events else None

    def to_dict(self, trajectory_refs: dict[int, str] | None = None, timing: bool = False) -> dict:
        """JSON-ready report; wall-clock fields only with ``timing=True`` so the
        default form is identical across repeated single-worker runs."""
        refs = trajectory_refs or {pid: f"traj_{pid:03d}.csv" for pid in self.solutions}
        events = []
        for e in self.events:
            item = {"episode": e.episode, "process": e.process, "J": e.J, "iterations": e.iterations}
            if timing:
                item["time"] = e.time
            item["trajectory"] = refs.get(e.process)
            events.append(item)
        d = {
            "c_min": self.c_min if self.events else None,
            "has_solution": self.has_solution,
            "front_size": self.front_size,
            "n_processes": len(self.iterations),
            "episodes_run": self.episodes_run,
            "events": events,
            "processes": [
                {
                    "id": pid,
                    "seed_cost": list(self.seed_costs[pid]),
                    "iterations": self.iterations[pid],
                    "status": self.status[pid],
                    "J": self.costs.get(pid),
                    "converged_episode": self.converged_episode.get(pid),
                    "trajectory": refs.get(pid),
                }
                for pid in sorted(self.iterations)
            ],
        }
        if timing:
            d["timings"] = dict(self.timings)
        return d

    def write(self, out_dir, svg: bool = False, field: CostField | None = None) -> Path:
        """Report JSON plus one trajectory CSV per converged process."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        refs = {}
        for pid, traj in sorted(self.solutions.items()):
            name = f"traj_{pid:03d}.csv"
            save_trajectory(traj, out / name)
            refs[pid] = name
        path = out / "report.json"
        path.write_text(json.dumps(self.to_dict(refs), indent=2))
        (out / "timings.json").write_text(json.dumps(dict(self.timings), indent=2))
        stream = [asdict(p) for p in anytime_stream(self)]
        (out / "anytime.json").write_text(json.dumps({"flagged_empty": not stream, "points": stream}, indent=2))
        if svg and field is not None:
            from .svg import overlay_svg

            best = self.best_process
            trajs = [(t.states[:, :2], pid == best) for pid, t in sorted(self.solutions.items())]
            overlay_svg(out / "overlay.svg", field, [p.points for p in self.seeds], trajs)
        return path


_opt = {"type": ["number", "null"]}
REPORT_SCHEMA = {
    "type": "object",
    "required": ["c_min", "has_solution", "events", "processes", "front_size", "n_processes"],
    "properties": {
        "c_min": _opt,
        "has_solution": {"type": "boolean"},
        "front_size": {"type": "integer", "minimum": 0},
        "n_processes": {"type": "integer", "minimum": 0},
        "episodes_run": {"type": "integer", "minimum": 0},
        "events": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["episode", "process", "J", "iterations", "trajectory"],
                "properties": {
                    "episode": {"type": "integer", "minimum": 1},
                    "process": {"type": "integer", "minimum": 0},
                    "J": {"type": "number"},
                    "time": {"type": "number", "minimum": 0},
                    "iterations": {"type": "integer", "minimum": 0},
                    "trajectory": {"type": ["string", "null"]},
                },
            },
        },
        "processes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "seed_cost", "iterations", "status"],
                "properties": {
                    "id": {"type": "integer"},
                    "seed_cost": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                    "iterations": {"type": "integer", "minimum": 0},
                    "status": {"enum": ["converged", "failed", "running"]},
                    "J": _opt,
                    "converged_episode": {"type": ["integer", "null"]},
                    "trajectory": {"type": ["string", "null"]},
                },
            },
        },
        "timings": {"type": "object", "additionalProperties": {"type": "number"}},
    },
}


@dataclass
class AnytimePoint:
    episode: int
    time: float
    J: float
    ratio_to_best: float


def anytime_stream(report: RunReport) -> list[AnytimePoint]:
    """Reported-solution timeline, sorted by episode; empty when nothing converged."""
    if not report.events:
        return []
    best = min(e.J for e in report.events)
    events = sorted(report.events, key=lambda e: (e.episode, e.time))

    def ratio(j):
        if best == 0:
            return 1.0 if j == 0 else math.inf
        return j / best

    return [AnytimePoint(e.episode, e.time, e.J, ratio(e.J)) for e in events]


def plan_seeds(cf: CostField, x_init, x_goal, cfg: RunConfig, lattice: Lattice | None = None, timings=None):
    """Lattice search and filtering: returns ``(front, kept_paths)``."""
    timings = {} if timings is None else timings
    t0 = time.perf_counter()
    lat = lattice if lattice is not None else cfg.lattice_for(cf)
    lat.graph()
    t1 = time.perf_counter()
    v_init, v_goal = lat.snap(x_init[:3]), lat.snap(x_goal[:3])
    if v_init == v_goal:
        raise ValueError(f"start and goal snap to the same lattice vertex {v_init}")
    front = moa_star(lat, v_init, v_goal)
    t2 = time.perf_counter()
    if front.unreachable:
        raise UnreachableError(f"goal {tuple(x_goal[:3])} is unreachable from {tuple(x_init[:3])}")
    kept = filter_paths(front, cfg.d_h_thres, cfg.scalarize_weight)
    if cfg.max_processes is not None:
        kept = kept[: cfg.max_processes]
    t3 = time.perf_counter()
    timings.update(lattice=t1 - t0, search=t2 - t1, filter=t3 - t2)
    return front, kept


def _advance(p: OptProcess, k: int) -> OptProcess:
    return step(p, k)


def _workers(cfg: RunConfig, override: int | None = None) -> int:
    if override is not None:
        return max(1, override)
    env = os.environ.get(WORKERS_ENV)
    n = int(env) if env else cfg.workers
    return max(1, n)


def run_pwto(
    cf: CostField,
    x_init,
    x_goal,
    cfg: RunConfig | None = None,
    lattice: Lattice | None = None,
    clock: Callable[[], float] = time.perf_counter,
    workers: int | None = None,
) -> RunReport:
    """Plan with Pareto-optimal warm starts and round-robin optimization.

    ``workers`` overrides both ``cfg.workers`` and the ``PWTO_WORKERS``
    environment variable (used by the benchmark, which parallelizes across
    instances instead).
    """
    cfg = cfg or RunConfig()
    x_init = np.asarray(x_init, dtype=float)
    x_goal = np.asarray(x_goal, dtype=float)
    if np.array_equal(x_init, x_goal):
        raise ValueError("x_init and x_goal coincide")
    report = RunReport()
    t_start = clock()
    front, kept = plan_seeds(cf, x_init, x_goal, cfg, lattice, report.timings)
    report.front_size = len(front)
    report.seeds = kept
    if not kept:
        raise RuntimeError("filtering left no seed paths")

    t0 = time.perf_counter()
    procs: dict[int, OptProcess] = {}
    for pid, path in enumerate(kept):
        guess = path_to_guess(path, cfg.n_nodes, cfg.v_nominal, cfg.bounds)
        procs[pid] = transcribe(guess, cf, cfg.weights, x_init, x_goal, cfg.bounds, label=f"seed{pid}")
        report.seed_costs[pid] = tuple(float(c) for c in path.cost_unscaled)
        report.iterations[pid] = 0
        report.status[pid] = "failed" if procs[pid].failed else "running"
    report.timings["transcribe"] = time.perf_counter() - t0

    # kept paths are already in ascending scalarized order, so pid order is the episode order
    live = [pid for pid in procs if report.status[pid] == "running"]
    n_workers = _workers(cfg, workers)
    pool = ProcessPoolExecutor(n_workers) if n_workers > 1 else None
    t_opt = time.perf_counter()
    try:
        for episode in range(1, cfg.n_episode + 1):
            if not live:
                break
            report.episodes_run = episode
            if pool is not None:
                results = list(pool.map(_advance, [procs[pid] for pid in live], [cfg.k] * len(live)))
                for pid, p in zip(live, results):
                    procs[pid] = p
            still = []
            for pid in live:
                p = procs[pid] if pool is not None else step(procs[pid], cfg.k)
                report.iterations[pid] = p.iterations_done
                if p.converged:
                    report.status[pid] = "converged"
                    report.costs[pid] = p.cost
                    report.solutions[pid] = p.trajectory
                    report.converged_episode[pid] = episode
                    if p.cost < report.c_min:
                        report.c_min = p.cost
                        report.events.append(ReportEvent(episode, pid, p.cost, clock() - t_start, p.iterations_done))
                elif p.failed:
                    report.status[pid] = "failed"
                else:
                    still.append(pid)
            live = still
    finally:
        if pool is not None:
            pool.shutdown()
    report.timings["optimize"] = time.perf_counter() - t_opt
    report.timings["total"] = clock() - t_start
    return report
