"""Hermite-Simpson direct collocation for the second-order unicycle.

State ``x = (px, py, theta, v, omega)``, control ``u = (a_v, a_w)``. The
public iterate is ``[X.ravel(), U.ravel(), T]`` for ``N`` uniformly spaced
nodes (length ``7 N + 1``). Internally the solver also carries one slack per
segment for the midpoint velocities ``(v, omega)`` of the Hermite-Simpson
interpolant, so the speed limits hold between nodes as well as at them.
The NLP objective adds a reference tracking term to the trajectory cost;
both are integrated with the trapezoid rule.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .auglag import AugLagOptions, AugLagSolver
from .costfield import CostField

__all__ = [
    "StateBounds",
    "RobotState",
    "RobotControl",
    "Trajectory",
    "WeightConfig",
    "Transcription",
    "OptProcess",
    "InvalidStateError",
    "dynamics",
    "hs_defects",
    "path_to_guess",
    "polyline_to_guess",
    "transcribe",
    "step",
    "check_converged",
    "solution_cost",
    "save_trajectory",
    "load_trajectory",
]

NX, NU = 5, 2
NMID = 2  # bounded midpoint components: v, omega
CONV_REL_TOL = 1e-6
CONV_VIOL_TOL = 1e-4
# an iterate whose projected merit gradient is this small is stationary even if no
# step was ever accepted (e.g. the warm start is already optimal)
STATIONARY_TOL = 1e-10


class InvalidStateError(RuntimeError):
    """Operation not allowed in the process's current state."""


@dataclass(frozen=True)
class StateBounds:
    xy: tuple[float, float] = (0.0, 1.0)
    v: tuple[float, float] = (0.0, 0.05)
    omega: tuple[float, float] = (-1.57, 1.57)
    a_v: tuple[float, float] = (-0.1, 0.1)
    a_w: tuple[float, float] = (-1.0, 1.0)

    def state_lo(self):
        return np.array([self.xy[0], self.xy[0], -np.inf, self.v[0], self.omega[0]])

    def state_hi(self):
        return np.array([self.xy[1], self.xy[1], np.inf, self.v[1], self.omega[1]])

    def control_lo(self):
        return np.array([self.a_v[0], self.a_w[0]])

    def control_hi(self):
        return np.array([self.a_v[1], self.a_w[1]])


BOUNDS = StateBounds()


@dataclass(frozen=True)
class RobotState:
    px: float
    py: float
    theta: float = 0.0
    v: float = 0.0
    omega: float = 0.0

    def as_array(self):
        return np.array([self.px, self.py, self.theta, self.v, self.omega])


@dataclass(frozen=True)
class RobotControl:
    a_v: float = 0.0
    a_w: float = 0.0

    def as_array(self):
        return np.array([self.a_v, self.a_w])


@dataclass
class Trajectory:
    states: np.ndarray  # (N, 5)
    controls: np.ndarray  # (N, 2)
    T: float

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float).reshape(-1, NX)
        self.controls = np.asarray(self.controls, dtype=float).reshape(-1, NU)
        if len(self.states) < 2 or len(self.states) != len(self.controls):
            raise ValueError("trajectory needs N >= 2 matching state and control nodes")
        if not self.T > 0:
            raise ValueError("horizon must be positive")

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def dt(self) -> float:
        return self.T / (self.n - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.states.ravel(), self.controls.ravel(), [self.T]])

    @classmethod
    def from_vector(cls, z, n: int) -> "Trajectory":
        z = np.asarray(z, dtype=float)
        return cls(z[: NX * n].reshape(n, NX), z[NX * n : (NX + NU) * n].reshape(n, NU), float(z[-1]))


@dataclass
class WeightConfig:
    R: np.ndarray = field(default_factory=lambda: np.diag([1.0, 1.0]))
    Q: np.ndarray = field(default_factory=lambda: np.diag([50.0, 50.0, 5.0, 0.0, 0.0]))
    field_scale: float = 1.0

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=float).reshape(NU, NU)
        self.Q = np.asarray(self.Q, dtype=float).reshape(NX, NX)
        for name, M in (("R", self.R), ("Q", self.Q)):
            if not np.allclose(M, M.T) or np.linalg.eigvalsh(M).min() < -1e-12:
                raise ValueError(f"{name} must be symmetric positive semi-definite")
        if self.field_scale < 0:
            raise ValueError("field_scale must be non-negative")

    def to_dict(self) -> dict:
        return {"R": self.R.tolist(), "Q": self.Q.tolist(), "field_scale": self.field_scale}

    @classmethod
    def from_dict(cls, d: dict) -> "WeightConfig":
        return cls(**{k: d[k] for k in ("R", "Q", "field_scale") if k in d})


# -- dynamics and collocation ---------------------------------------------------


def dynamics(x, u):
    """Second-order unicycle: ``(v cos th, v sin th, omega, a_v, a_w)``; vectorized."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    th, v = x[..., 2], x[..., 3]
    return np.stack([v * np.cos(th), v * np.sin(th), x[..., 4], u[..., 0], u[..., 1]], axis=-1)


def _jac_x(x):
    th, v = x[:, 2], x[:, 3]
    c, s = np.cos(th), np.sin(th)
    A = np.zeros((len(x), NX, NX))
    A[:, 0, 2] = -v * s
    A[:, 0, 3] = c
    A[:, 1, 2] = v * c
    A[:, 1, 3] = s
    A[:, 2, 4] = 1.0
    return A


_B = np.zeros((NX, NU))
_B[3, 0] = _B[4, 1] = 1.0


def _fxx(lam, x):
    """Hessian in ``x`` of ``lam . f(x, u)``; only the (theta, v) block is nonzero."""
    th, v = x[:, 2], x[:, 3]
    c, s = np.cos(th), np.sin(th)
    H = np.zeros((len(x), NX, NX))
    H[:, 2, 2] = -v * (lam[:, 0] * c + lam[:, 1] * s)
    H[:, 2, 3] = H[:, 3, 2] = -lam[:, 0] * s + lam[:, 1] * c
    return H


def hs_defects(X, U, T):
    """Hermite-Simpson defects, shape (N-1, 5)."""
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float)
    h = T / (len(X) - 1)
    f = dynamics(X, U)
    xm = 0.5 * (X[:-1] + X[1:]) + (h / 8.0) * (f[:-1] - f[1:])
    um = 0.5 * (U[:-1] + U[1:])
    fm = dynamics(xm, um)
    return X[1:] - X[:-1] - (h / 6.0) * (f[:-1] + 4.0 * fm + f[1:])


# segment-local variable layout: x_k (0:5), u_k (5:7), x_k+1 (7:12), u_k+1 (12:14), T (14)
_SEG = 15


def _segment_terms(X, U, T, lam=None):
    """Defects, their Jacobians (S, 5, 15) and optionally the Hessians of lam . defect."""
    n = len(X)
    S = n - 1
    hT = 1.0 / (n - 1)
    h = T * hT
    xk, x1, uk, u1 = X[:-1], X[1:], U[:-1], U[1:]
    fk, f1 = dynamics(xk, uk), dynamics(x1, u1)
    Ak, A1 = _jac_x(xk), _jac_x(x1)
    Dk = np.zeros((S, NX, _SEG))
    Dk[:, :, 0:5] = Ak
    Dk[:, :, 5:7] = _B
    D1 = np.zeros((S, NX, _SEG))
    D1[:, :, 7:12] = A1
    D1[:, :, 12:14] = _B

    xm = 0.5 * (xk + x1) + (h / 8.0) * (fk - f1)
    um = 0.5 * (uk + u1)
    Xm = (h / 8.0) * (Dk - D1)
    Xm[:, :, 0:5] += 0.5 * np.eye(NX)
    Xm[:, :, 7:12] += 0.5 * np.eye(NX)
    Xm[:, :, 14] = (hT / 8.0) * (fk - f1)
    Um = np.zeros((S, NU, _SEG))
    Um[:, :, 5:7] = 0.5 * np.eye(NU)
    Um[:, :, 12:14] = 0.5 * np.eye(NU)
    fm = dynamics(xm, um)
    Am = _jac_x(xm)
    Dm = Am @ Xm + _B @ Um

    fsum = fk + 4.0 * fm + f1
    zeta = x1 - xk - (h / 6.0) * fsum
    Jz = -(h / 6.0) * (Dk + 4.0 * Dm + D1)
    Jz[:, :, 0:5] -= np.eye(NX)
    Jz[:, :, 7:12] += np.eye(NX)
    Jz[:, :, 14] -= (hT / 6.0) * fsum
    if lam is None:
        return zeta, Jz, None

    def embed(H, off):
        E = np.zeros((S, _SEG, _SEG))
        E[:, off : off + 5, off : off + 5] = H
        return E

    mu = np.einsum("sji,sj->si", Am, lam)
    Hm = np.einsum("sai,sab,sbj->sij", Xm, _fxx(lam, xm), Xm)
    Hm += (h / 8.0) * (embed(_fxx(mu, xk), 0) - embed(_fxx(mu, x1), 7))
    gmu = (hT / 8.0) * np.einsum("si,sij->sj", mu, Dk - D1)
    Hm[:, 14, :] += gmu
    Hm[:, :, 14] += gmu
    Hz = -(h / 6.0) * (embed(_fxx(lam, xk), 0) + 4.0 * Hm + embed(_fxx(lam, x1), 7))
    G = (hT / 6.0) * np.einsum("si,sij->sj", lam, Dk + 4.0 * Dm + D1)
    Hz[:, 14, :] -= G
    Hz[:, :, 14] -= G
    return zeta, Jz, Hz


class Transcription:
    """The NLP for one warm start: objective, defect constraints and bounds."""

    def __init__(self, field: CostField, weights: WeightConfig, reference: Trajectory, x_init, x_goal,
                 bounds: StateBounds = BOUNDS, t_range=(0.1, 10.0), midpoint_bounds: bool = True):
        self.field = field
        self.w = weights
        self.n = reference.n
        self.bounds = bounds
        self.reference = reference
        self.x_init = np.asarray(x_init, dtype=float)
        self.x_goal = np.asarray(x_goal, dtype=float)
        n = self.n
        self.midpoint_bounds = midpoint_bounds
        # decision vector: X (5N), U (2N), midpoint (v, omega) slacks (2(N-1), optional), T
        self.n_traj = (NX + NU) * n
        self.n_slack = NMID * (n - 1) if midpoint_bounds else 0
        self.nz = self.n_traj + self.n_slack + 1
        slo, shi = bounds.state_lo(), bounds.state_hi()
        for name, xb in (("x_init", self.x_init), ("x_goal", self.x_goal)):
            if xb.shape != (NX,) or np.any(xb < slo - 1e-12) or np.any(xb > shi + 1e-12):
                raise ValueError(f"{name} {xb} violates the state bounds")
        lo_x = np.tile(slo, (n, 1))
        hi_x = np.tile(shi, (n, 1))
        lo_x[0] = hi_x[0] = self.x_init
        lo_x[-1] = hi_x[-1] = self.x_goal
        lo_u = np.tile(bounds.control_lo(), (n, 1))
        hi_u = np.tile(bounds.control_hi(), (n, 1))
        lo_s = np.tile(slo[3:], n - 1) if midpoint_bounds else np.zeros(0)
        hi_s = np.tile(shi[3:], n - 1) if midpoint_bounds else np.zeros(0)
        tg = reference.T
        self.lo = np.concatenate([lo_x.ravel(), lo_u.ravel(), lo_s, [t_range[0] * tg]])
        self.hi = np.concatenate([hi_x.ravel(), hi_u.ravel(), hi_s, [t_range[1] * tg]])
        self.wts = np.ones(n)
        self.wts[0] = self.wts[-1] = 0.5

        k = np.arange(n - 1)
        seg = np.empty((n - 1, _SEG), dtype=np.int64)
        for j in range(NX):
            seg[:, j] = NX * k + j
            seg[:, 7 + j] = NX * (k + 1) + j
        for j in range(NU):
            seg[:, 5 + j] = NX * n + NU * k + j
            seg[:, 12 + j] = NX * n + NU * (k + 1) + j
        seg[:, 14] = self.nz - 1
        self.seg = seg
        rows = np.repeat(np.arange(NX * (n - 1)).reshape(n - 1, NX, 1), _SEG, axis=2)
        cols = np.repeat(seg[:, None, :], NX, axis=1)
        self._jrows, self._jcols = rows.ravel(), cols.ravel()
        self._crows = np.repeat(seg[:, :, None], _SEG, axis=2).ravel()
        self._ccols = np.repeat(seg[:, None, :], _SEG, axis=1).ravel()
        if midpoint_bounds:
            # row r = 5(N-1) + 2k + j depends on v/omega at both nodes, the matching
            # control at both nodes, T, and its own slack
            mcols = np.stack([seg[:, [3 + j, 10 + j, 5 + j, 12 + j, 14]] for j in range(NMID)], axis=1)
            scol = (self.n_traj + NMID * k[:, None] + np.arange(NMID)).reshape(n - 1, NMID, 1)
            mcols = np.concatenate([mcols, scol], axis=2)
            mrows = np.repeat((NX * (n - 1) + NMID * k[:, None] + np.arange(NMID))[:, :, None], 6, axis=2)
            self._mrows, self._mcols = mrows.ravel(), mcols.ravel()
            # Hessian of the midpoint rows: only T x control cross terms
            tcol = np.full((n - 1, NMID), self.nz - 1)
            ucur = seg[:, 5:7]
            unxt = seg[:, 12:14]
            self._mh_rows = np.concatenate([tcol, ucur, tcol, unxt], axis=None)
            self._mh_cols = np.concatenate([ucur, tcol, unxt, tcol], axis=None)
        self.n_cons = NX * (n - 1) + self.n_slack
        xb = (NX * np.arange(n))[:, None] + np.arange(NX)
        ub = (NX * n + NU * np.arange(n))[:, None] + np.arange(NU)
        nonT = np.arange(self.nz - 1)
        self._hrows = np.concatenate([
            np.repeat(xb[:, :, None], NX, axis=2).ravel(),
            np.repeat(ub[:, :, None], NU, axis=2).ravel(),
            np.full(self.nz - 1, self.nz - 1), nonT,
        ])
        self._hcols = np.concatenate([
            np.repeat(xb[:, None, :], NX, axis=1).ravel(),
            np.repeat(ub[:, None, :], NU, axis=1).ravel(),
            nonT, np.full(self.nz - 1, self.nz - 1),
        ])
        # node-major ordering makes the Hessian banded apart from the horizon variable
        blocks = [np.hstack([xb, ub])]
        if midpoint_bounds:
            sb = self.n_traj + NMID * np.arange(n - 1)[:, None] + np.arange(NMID)
            blocks.append(np.vstack([sb, np.full((1, NMID), -1)]))
        order = np.hstack(blocks).ravel()
        self.band_order = np.concatenate([order[order >= 0], [self.nz - 1]])
        self.arrow = np.array([self.nz - 1])

    def initial_vector(self, traj: Trajectory) -> np.ndarray:
        """Decision vector for ``traj`` with slacks at the (clipped) midpoint values."""
        parts = [traj.states.ravel(), traj.controls.ravel()]
        if self.midpoint_bounds:
            mid = self._midpoint(traj.states, traj.controls, traj.T)
            parts.append(np.clip(mid.ravel(), self.lo[self.n_traj : -1], self.hi[self.n_traj : -1]))
        return np.concatenate(parts + [[traj.T]])

    def trajectory_vector(self, z) -> np.ndarray:
        """``z`` without the internal slack variables: (states, controls, T)."""
        return np.concatenate([z[: self.n_traj], z[-1:]])

    @staticmethod
    def _midpoint(X, U, T):
        """Hermite-Simpson midpoint (v, omega), shape (N-1, 2)."""
        h = T / (len(X) - 1)
        return 0.5 * (X[:-1, 3:] + X[1:, 3:]) + (h / 8.0) * (U[:-1] - U[1:])

    # -- layout -------------------------------------------------------------------

    def split(self, z):
        n = self.n
        return z[: NX * n].reshape(n, NX), z[NX * n : (NX + NU) * n].reshape(n, NU), z[-1]

    # -- objective ------------------------------------------------------------------

    def _running(self, z, tracking=True):
        X, U, T = self.split(z)
        C = np.asarray(self.field.eval(X[:, :2])) if len(self.field) else np.zeros(self.n)
        L = self.w.field_scale * C + np.einsum("ki,ij,kj->k", U, self.w.R, U)
        if tracking:
            e = X - self.reference.states
            L = L + np.einsum("ki,ij,kj->k", e, self.w.Q, e)
        return L, T / (self.n - 1)

    def f(self, z) -> float:
        """Objective with the tracking term (``J'``)."""
        L, h = self._running(z)
        return float(h * (self.wts @ L))

    def trajectory_cost(self, z) -> float:
        """Trajectory cost without tracking (``J``): field plus control effort."""
        L, h = self._running(z, tracking=False)
        return float(h * (self.wts @ L))

    def _running_derivs(self, z):
        X, U, T = self.split(z)
        n = self.n
        if len(self.field):
            C, gC, hC = self.field.eval_grad_hess(X[:, :2])
        else:
            C, gC, hC = np.zeros(n), np.zeros((n, 2)), np.zeros((n, 2, 2))
        e = X - self.reference.states
        s = self.w.field_scale
        L = s * C + np.einsum("ki,ij,kj->k", U, self.w.R, U) + np.einsum("ki,ij,kj->k", e, self.w.Q, e)
        Lx = 2.0 * e @ self.w.Q
        Lx[:, :2] += s * gC
        Lu = 2.0 * U @ self.w.R
        return L, Lx, Lu, s * hC

    def grad(self, z):
        n = self.n
        L, Lx, Lu, _ = self._running_derivs(z)
        h = z[-1] / (n - 1)
        a = (h * self.wts)[:, None]
        return np.concatenate([(a * Lx).ravel(), (a * Lu).ravel(), np.zeros(self.n_slack), [(self.wts @ L) / (n - 1)]])

    def hess(self, z):
        n = self.n
        L, Lx, Lu, hC = self._running_derivs(z)
        h = z[-1] / (n - 1)
        a = h * self.wts
        Hxx = np.broadcast_to(2.0 * self.w.Q, (n, NX, NX)).copy()
        Hxx[:, :2, :2] += hC
        Hxx *= a[:, None, None]
        Huu = a[:, None, None] * (2.0 * self.w.R)
        gT = np.concatenate([(self.wts[:, None] * Lx).ravel(), (self.wts[:, None] * Lu).ravel(), np.zeros(self.n_slack)]) / (n - 1)
        vals = np.concatenate([Hxx.ravel(), Huu.ravel(), gT, gT])
        return sp.csr_matrix((vals, (self._hrows, self._hcols)), shape=(self.nz, self.nz))

    # -- constraints ----------------------------------------------------------------

    def cons(self, z):
        """Defects, then (optionally) midpoint (v, omega) minus their slacks."""
        X, U, T = self.split(z)
        d = hs_defects(X, U, T).ravel()
        if not self.midpoint_bounds:
            return d
        mid = self._midpoint(X, U, T).ravel() - z[self.n_traj : -1]
        return np.concatenate([d, mid])

    def jac(self, z):
        X, U, T = self.split(z)
        _, Jz, _ = _segment_terms(X, U, T)
        rows, cols, vals = self._jrows, self._jcols, Jz.ravel()
        if self.midpoint_bounds:
            hT = 1.0 / (self.n - 1)
            h = T * hT
            du = U[:-1] - U[1:]
            one = np.ones_like(du)
            mv = np.stack([0.5 * one, 0.5 * one, (h / 8.0) * one, -(h / 8.0) * one, (hT / 8.0) * du, -one], axis=-1)
            rows = np.concatenate([rows, self._mrows])
            cols = np.concatenate([cols, self._mcols])
            vals = np.concatenate([vals, mv.ravel()])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_cons, self.nz))

    def cons_hess(self, z, y):
        X, U, T = self.split(z)
        y = np.asarray(y, dtype=float)
        nd = NX * (self.n - 1)
        _, _, Hz = _segment_terms(X, U, T, y[:nd].reshape(self.n - 1, NX))
        rows, cols, vals = self._crows, self._ccols, Hz.ravel()
        if self.midpoint_bounds:
            c = y[nd:].reshape(self.n - 1, NMID) / (8.0 * (self.n - 1))
            rows = np.concatenate([rows, self._mh_rows])
            cols = np.concatenate([cols, self._mh_cols])
            vals = np.concatenate([vals, c, c, -c, -c], axis=None)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.nz, self.nz))

    def max_violation(self, z) -> float:
        """Largest defect, boundary or box violation at ``z``."""
        X, _, _ = self.split(z)
        d = float(np.max(np.abs(self.cons(z)), initial=0.0))
        box = float(np.max(np.maximum(self.lo - z, 0.0), initial=0.0))
        box = max(box, float(np.max(np.maximum(z - self.hi, 0.0), initial=0.0)))
        return max(d, box)

    def scales(self):
        """Variable and defect-row scaling used by the solver."""
        b = self.bounds
        xs = np.array([1.0, 1.0, 1.0, b.v[1] - b.v[0], 0.5 * (b.omega[1] - b.omega[0])])
        us = 0.5 * (self.bounds.control_hi() - self.bounds.control_lo())
        ms = np.tile(xs[3:], self.n - 1) if self.midpoint_bounds else np.zeros(0)
        var = np.concatenate([np.tile(xs, self.n), np.tile(us, self.n), ms, [self.reference.T]])
        con = np.concatenate([np.tile(xs, self.n - 1), ms])
        return var, con


# -- warm starts ------------------------------------------------------------------------


def _clip_guess(states, controls, bounds: StateBounds):
    states[:, 0:2] = np.clip(states[:, 0:2], *bounds.xy)
    states[:, 3] = np.clip(states[:, 3], *bounds.v)
    states[:, 4] = np.clip(states[:, 4], *bounds.omega)
    controls[:, 0] = np.clip(controls[:, 0], *bounds.a_v)
    controls[:, 1] = np.clip(controls[:, 1], *bounds.a_w)


def _kinematic_fill(pos, T, bounds: StateBounds = BOUNDS) -> Trajectory:
    """Heading, velocities and accelerations of ``pos`` by finite differences."""
    n = len(pos)
    dt = T / (n - 1)
    seg = np.diff(pos, axis=0)
    th = np.arctan2(seg[:, 1], seg[:, 0])
    th = np.unwrap(np.append(th, th[-1]))
    vel = np.gradient(pos, dt, axis=0)
    v = np.hypot(vel[:, 0], vel[:, 1])
    w = np.gradient(th, dt)
    states = np.column_stack([pos, th, v, w])
    controls = np.column_stack([np.gradient(v, dt), np.gradient(w, dt)])
    _clip_guess(states, controls, bounds)
    return Trajectory(states, controls, T)


def polyline_to_guess(points, n_nodes: int, v_nominal: float, bounds: StateBounds = BOUNDS) -> Trajectory:
    """Resample a polyline at ``n_nodes`` equal arc-length stations and fill the rest."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(np.diff(pts, axis=0) != 0.0, axis=1)
    pts = pts[keep]
    if len(pts) < 2:
        raise ValueError("path has zero length")
    s = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
    length = s[-1]
    st = np.linspace(0.0, length, n_nodes)
    pos = np.column_stack([np.interp(st, s, pts[:, 0]), np.interp(st, s, pts[:, 1])])
    pos[0], pos[-1] = pts[0], pts[-1]
    return _kinematic_fill(pos, length / v_nominal, bounds)


def path_to_guess(path, n_nodes: int = 100, v_nominal: float = 0.04, bounds: StateBounds = BOUNDS) -> Trajectory:
    """Warm start from a lattice path (uses its primitive-sample polyline)."""
    pts = np.asarray(path.points, dtype=float)
    if len(pts) == 0:
        pts = np.array([v[:2] if not hasattr(v, "ix") else (v.ix, v.iy) for v in path.vertices], dtype=float)
    if len(pts) < 2:
        raise ValueError("path needs at least two vertices")
    return polyline_to_guess(pts, n_nodes, v_nominal, bounds)


# -- optimization process -------------------------------------------------------------------


@dataclass
class OptProcess:
    problem: Transcription
    solver: AugLagSolver
    iterations_done: int = 0
    converged: bool = False
    failed: bool = False
    cost: float = math.nan
    cost_aug: float = math.nan
    prev_cost_aug: float = math.nan
    label: str = ""

    @property
    def iterate(self) -> np.ndarray:
        """Current (states, controls, T) vector; internal slacks are omitted."""
        return self.problem.trajectory_vector(self.solver.z)

    @property
    def trajectory(self) -> Trajectory:
        return Trajectory.from_vector(self.iterate, self.problem.n)

    @property
    def max_violation(self) -> float:
        return self.problem.max_violation(self.solver.z)

    def status(self) -> dict:
        return {
            "iterations": self.iterations_done,
            "converged": self.converged,
            "failed": self.failed,
            "J": self.cost,
            "J_aug": self.cost_aug,
            "max_violation": self.max_violation,
        }

    def _update_costs(self):
        z = self.solver.z
        self.prev_cost_aug = self.cost_aug
        self.cost_aug = self.problem.f(z)
        self.cost = self.problem.trajectory_cost(z)


def _align_heading(guess: Trajectory, x_init, x_goal):
    """Shift the guess heading branch onto ``x_init`` and pick the goal branch nearest the guess."""
    states = guess.states.copy()
    two_pi = 2 * math.pi
    states[:, 2] += two_pi * round((x_init[2] - states[0, 2]) / two_pi)
    goal = np.array(x_goal, dtype=float)
    goal[2] += two_pi * round((states[-1, 2] - goal[2]) / two_pi)
    return Trajectory(states, guess.controls.copy(), guess.T), goal


def transcribe(guess: Trajectory, field: CostField, w: WeightConfig | None = None, x_init=None, x_goal=None,
               bounds: StateBounds = BOUNDS, options: AugLagOptions | None = None, label: str = "") -> OptProcess:
    """Set up a resumable optimization process warm-started (and referenced) at ``guess``."""
    w = w or WeightConfig()
    x_init = np.asarray(guess.states[0] if x_init is None else x_init, dtype=float)
    x_goal = np.asarray(guess.states[-1] if x_goal is None else x_goal, dtype=float)
    slo, shi = bounds.state_lo(), bounds.state_hi()
    for name, xb in (("x_init", x_init), ("x_goal", x_goal)):
        if np.any(xb < slo) or np.any(xb > shi):
            raise ValueError(f"{name} {xb} violates the state bounds")
    ref, goal = _align_heading(guess, x_init, x_goal)
    prob = Transcription(field, w, ref, x_init, goal, bounds)
    z0 = prob.initial_vector(ref)
    var_s, con_s = prob.scales()
    f0 = prob.f(np.clip(z0, prob.lo, prob.hi))
    solver = AugLagSolver(prob, z0, var_s, con_s, obj_scale=1.0 / max(1.0, abs(f0)), options=options or AugLagOptions())
    p = OptProcess(prob, solver, label=label)
    p._update_costs()
    p.failed = solver.failed
    return p


def check_converged(p: OptProcess) -> bool:
    """Relative change of ``J'`` over the last accepted iteration below 1e-6 and violation below 1e-4.

    An iterate that is already first-order stationary (projected gradient of
    the merit below ``STATIONARY_TOL``) also counts, since no further step
    will ever be accepted from it.
    """
    if p.iterations_done == 0 or p.max_violation >= CONV_VIOL_TOL:
        return False
    if p.solver.projected_gradient_norm() <= STATIONARY_TOL:
        return True
    if not math.isfinite(p.prev_cost_aug):
        return False
    rel = abs(p.cost_aug - p.prev_cost_aug) / max(abs(p.prev_cost_aug), 1e-12)
    return rel < CONV_REL_TOL


def step(p: OptProcess, k: int) -> OptProcess:
    """Advance ``p`` by up to ``k`` solver iterations, stopping early at convergence."""
    if k < 0:
        raise ValueError("iteration budget must be non-negative")
    if p.converged or p.failed:
        return p
    for _ in range(k):
        p.solver.run(1)
        p.iterations_done += 1
        if not p.solver.accepted:
            # a rejected trial leaves the iterate and the last accepted change untouched
            if check_converged(p):
                p.converged = True
                break
            continue
        p._update_costs()
        if p.solver.failed or not (math.isfinite(p.cost_aug) and math.isfinite(p.cost)):
            p.failed = True
            break
        if check_converged(p):
            p.converged = True
            break
    return p


def solution_cost(p: OptProcess) -> float:
    if not p.converged:
        raise InvalidStateError("solution cost is only defined for a converged process")
    return p.cost


# -- file formats --------------------------------------------------------------------------

_TRAJ_COLS = ["t", "px", "py", "theta", "v", "omega", "a_v", "a_w"]


def save_trajectory(traj: Trajectory, path, extra: dict[str, np.ndarray] | None = None) -> None:
    extra = extra or {}
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_TRAJ_COLS + list(extra))
        for k, t in enumerate(traj.times):
            row = [t, *traj.states[k], *traj.controls[k]] + [extra[c][k] for c in extra]
            w.writerow([repr(float(v)) for v in row])


def load_trajectory(path) -> Trajectory:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][: len(_TRAJ_COLS)] != _TRAJ_COLS:
        raise ValueError(f"{path}: not a trajectory CSV (header {rows[0] if rows else None})")
    try:
        data = np.array([[float(v) for v in r[: len(_TRAJ_COLS)]] for r in rows[1:]])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc
    if len(data) < 2:
        raise ValueError(f"{path}: trajectory needs at least two rows")
    return Trajectory(data[:, 1:6], data[:, 6:8], float(data[-1, 0] - data[0, 0]))


def save_status(p: OptProcess, path) -> None:
    Path(path).write_text(json.dumps(p.status(), indent=2))
