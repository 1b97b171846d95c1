"""Closed-loop tracking of a planned trajectory by a pose-feedback unicycle.

The plant is the first-order (velocity-commanded) unicycle integrated with
forward Euler at ``dt = 0.1`` s. The command is the reference velocity pair
plus the classic pose-error feedback law

    e = Rot(-theta) (p_ref - p),   e_theta = wrap(theta_ref - theta)
    v = v_ref cos(e_theta) + k_x e_x
    w = w_ref + v_ref (k_y e_y + k_theta sin(e_theta))

clipped to the robot's velocity limits. Optional zero-mean Gaussian pose
noise is added after every step.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from scipy.interpolate import CubicHermiteSpline

from .dircol import BOUNDS, StateBounds, Trajectory, dynamics

__all__ = ["TrackerGains", "SimResult", "reference_at", "track", "save_sim", "SIM_DT", "SUMMARY_SCHEMA"]

SIM_DT = 0.1


@dataclass(frozen=True)
class TrackerGains:
    k_x: float = 5.0
    k_y: float = 100.0
    k_theta: float = 10.0

    def __post_init__(self):
        if min(self.k_x, self.k_y, self.k_theta) < 0:
            raise ValueError("gains must be non-negative")


@dataclass
class SimResult:
    times: np.ndarray  # (S,)
    states: np.ndarray  # (S, 3) executed pose
    reference: np.ndarray  # (S, 5) reference state sampled at the sim times
    commands: np.ndarray  # (S, 2) commanded (v, omega) applied from each time
    errors: np.ndarray  # (S, 3) robot-frame (e_x, e_y, e_theta)

    @property
    def position_errors(self) -> np.ndarray:
        return np.hypot(*(self.reference[:, :2] - self.states[:, :2]).T)

    @property
    def max_position_error(self) -> float:
        return float(self.position_errors.max())

    @property
    def final_position_error(self) -> float:
        return float(self.position_errors[-1])

    def goal_distance(self, goal) -> float:
        return float(np.hypot(*(np.asarray(goal[:2]) - self.states[-1, :2])))

    def summary(self) -> dict:
        return {
            "steps": len(self.times),
            "duration": float(self.times[-1]),
            "max_position_error": self.max_position_error,
            "final_position_error": self.final_position_error,
            "final_heading_error": float(abs(self.errors[-1, 2])),
        }


def _wrap(a):
    return (np.asarray(a) + math.pi) % (2 * math.pi) - math.pi


def reference_at(ref: Trajectory, t) -> np.ndarray:
    """Reference state at times ``t``.

    Uses the cubic Hermite interpolant through the nodes with slopes given by
    the dynamics, i.e. the same state interpolant that the collocation
    constraints are written for, so positions and velocities stay consistent
    between nodes.
    """
    X = ref.states.copy()
    X[:, 2] = np.unwrap(X[:, 2])
    dX = np.array([dynamics(x, u) for x, u in zip(X, ref.controls)])
    return CubicHermiteSpline(ref.times, X, dX, axis=0)(np.clip(t, 0.0, ref.T))


def track(reference: Trajectory, gains: TrackerGains | None = None, disturbance: float = 0.0, seed: int = 0,
          dt: float = SIM_DT, bounds: StateBounds = BOUNDS, init=None) -> SimResult:
    """Simulate tracking of ``reference`` over its horizon.

    The time grid is ``0, dt, ..., n dt`` with ``n = ceil(T / dt)``; the last
    stamp is clamped to ``T`` so the run ends exactly at the reference end.
    ``init`` overrides the starting pose (defaults to the reference start).
    """
    gains = gains or TrackerGains()
    if disturbance < 0:
        raise ValueError("disturbance std must be non-negative")
    rng = np.random.default_rng(seed)
    T = reference.T
    n = max(1, math.ceil(T / dt - 1e-9))
    times = np.minimum(np.arange(n + 1) * dt, T)
    ref = reference_at(reference, times)
    x = np.array(ref[0, :3] if init is None else init[:3], dtype=float)
    states = np.empty((n + 1, 3))
    cmds = np.zeros((n + 1, 2))
    errs = np.empty((n + 1, 3))
    v_lo, v_hi = bounds.v
    w_lo, w_hi = bounds.omega
    for k in range(n + 1):
        states[k] = x
        dx, dy = ref[k, 0] - x[0], ref[k, 1] - x[1]
        c, s = math.cos(x[2]), math.sin(x[2])
        ex = c * dx + s * dy
        ey = -s * dx + c * dy
        eth = float(_wrap(ref[k, 2] - x[2]))
        errs[k] = ex, ey, eth
        if k == n:
            break
        v_ref, w_ref = ref[k, 3], ref[k, 4]
        v = v_ref * math.cos(eth) + gains.k_x * ex
        w = w_ref + v_ref * (gains.k_y * ey + gains.k_theta * math.sin(eth))
        v = min(max(v, v_lo), v_hi)
        w = min(max(w, w_lo), w_hi)
        cmds[k] = v, w
        h = times[k + 1] - times[k]
        x = x + h * np.array([v * c, v * s, w])
        if disturbance > 0:
            x = x + rng.normal(0.0, disturbance, size=3)
    return SimResult(times, states, ref, cmds, errs)


SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["steps", "duration", "max_position_error", "final_position_error", "final_heading_error"],
    "properties": {
        "steps": {"type": "integer", "minimum": 1},
        "duration": {"type": "number", "minimum": 0},
        "max_position_error": {"type": "number", "minimum": 0},
        "final_position_error": {"type": "number", "minimum": 0},
        "final_heading_error": {"type": "number", "minimum": 0},
    },
}


def save_sim(res: SimResult, csv_path, json_path=None) -> None:
    """Executed trajectory CSV (trajectory columns plus error columns) and summary JSON."""
    with Path(csv_path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "px", "py", "theta", "v", "omega", "a_v", "a_w", "e_x", "e_y", "e_theta"])
        acc = np.gradient(res.commands, res.times, axis=0) if len(res.times) > 1 else np.zeros_like(res.commands)
        for k in range(len(res.times)):
            row = [res.times[k], *res.states[k], *res.commands[k], *acc[k], *res.errors[k]]
            w.writerow([repr(float(v)) for v in row])
    if json_path is not None:
        Path(json_path).write_text(json.dumps(res.summary(), indent=2))
