"""Resumable bound-constrained augmented-Lagrangian NLP solver.

Solves ``min f(z)  s.t.  c(z) = 0,  lo <= z <= hi`` with the classic
LANCELOT-style outer loop (multiplier / penalty updates driven by the
constraint norm) around a trust-region Newton inner method for the bound
constrained subproblem (Cauchy point on the projected-gradient path, then
Newton steps on the free variables). One *iteration* is one inner trial step,
accepted or not; outer updates happen between steps and never count. An
outer update is triggered when the projected gradient reaches its stage
tolerance or, failing that, after ``max_inner`` inner iterations in the stage.

All state lives on the :class:`AugLagSolver` instance, so ``solver.run(k1)``
followed by ``solver.run(k2)`` is identical to ``solver.run(k1 + k2)``.

The problem object must provide ``f(z)``, ``grad(z)``, ``hess(z)``,
``cons(z)``, ``jac(z)``, ``cons_hess(z, y)`` (``sum_i y_i * hess c_i``;
matrices dense or scipy-sparse) and arrays ``lo``, ``hi``. Optional
``band_order`` / ``arrow`` index arrays let the Newton solve use a banded
Cholesky with a Schur complement for the few dense coupling variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp


@dataclass
class AugLagOptions:
    rho0: float = 10.0
    rho_max: float = 1e9
    rho_growth: float = 10.0
    armijo: float = 1e-4
    max_backtracks: int = 40
    eps_active: float = 1e-3
    # inner iterations allowed per stage before the outer update is forced;
    # guards against an inner method that stalls just above its tolerance
    max_inner: int | None = 50


@dataclass
class AugLagSolver:
    problem: object
    z0: np.ndarray
    var_scale: np.ndarray
    con_scale: np.ndarray
    obj_scale: float = 1.0
    options: AugLagOptions = field(default_factory=AugLagOptions)

    def __post_init__(self):
        p = self.problem
        self.D = np.asarray(self.var_scale, dtype=float)
        self.lo = np.asarray(p.lo, dtype=float) / self.D
        self.hi = np.asarray(p.hi, dtype=float) / self.D
        self.fixed = self.lo == self.hi
        self.y = np.clip(np.asarray(self.z0, dtype=float) / self.D, self.lo, self.hi)
        m = len(self.con_scale)
        self.lam = np.zeros(m)
        self.rho = self.options.rho0
        self.omega = 1.0 / self.rho
        self.eta = 1.0 / self.rho**0.1
        self.iterations = 0
        self.outer_updates = 0
        self.stage = 0
        self.inner = 0
        self.failed = False
        self.merit_log: list[tuple[int, float]] = []
        self.radius = 1.0
        self.t_cauchy = 1.0
        self.delta_last = 0.0
        self.accepted = False
        self._refresh()
        if not math.isfinite(self.merit):
            self.failed = True

    # -- scaled evaluations --------------------------------------------------

    def _z(self, y):
        return y * self.D

    def _c(self, z):
        return self.problem.cons(z) / self.con_scale

    def _merit_at(self, y):
        z = self._z(y)
        c = self._c(z)
        return self.obj_scale * self.problem.f(z) + self.lam @ c + 0.5 * self.rho * (c @ c), c

    def _refresh(self):
        z = self._z(self.y)
        c = self._c(z)
        Jc = sp.diags(1.0 / self.con_scale) @ self.problem.jac(z)
        gz = self.obj_scale * self.problem.grad(z) + Jc.T @ (self.lam + self.rho * c)
        self.c = c
        self.Jc = Jc
        self.g = gz * self.D
        self.merit = self.obj_scale * self.problem.f(z) + self.lam @ c + 0.5 * self.rho * (c @ c)

    def _proj(self, y):
        return np.minimum(np.maximum(y, self.lo), self.hi)

    def projected_gradient_norm(self) -> float:
        return float(np.max(np.abs(self.y - self._proj(self.y - self.g)), initial=0.0))

    # -- outer loop ------------------------------------------------------------

    def _outer_update(self):
        cn = float(np.max(np.abs(self.c), initial=0.0))
        o = self.options
        if cn <= self.eta:
            self.lam = self.lam + self.rho * self.c
            self.eta = max(self.eta / self.rho**0.9, 1e-12)
            self.omega = max(self.omega / self.rho, 1e-12)
        else:
            self.rho = min(self.rho * o.rho_growth, o.rho_max)
            self.eta = max(1.0 / self.rho**0.1, 1e-12)
            self.omega = max(1.0 / self.rho, 1e-12)
        self.outer_updates += 1
        self.stage += 1
        self.inner = 0
        self._refresh()

    # -- inner step --------------------------------------------------------------

    def _hessian(self):
        """Sparse Hessian of the merit in scaled variables."""
        z = self._z(self.y)
        w = self.lam + self.rho * self.c
        H = sp.csr_matrix(self.problem.hess(z)) * self.obj_scale
        H = H + sp.csr_matrix(self.problem.cons_hess(z, w / self.con_scale))
        H = H + self.rho * (self.Jc.T @ self.Jc)
        Ds = sp.diags(self.D)
        return (Ds @ H @ Ds).tocsr()

    def _solve_free(self, H, r, free):
        """Regularized Newton solve ``(H_FF + delta I) w = -r_F``.

        Variables listed in ``problem.arrow`` couple to everything and are
        eliminated by a Schur complement; the rest, taken in
        ``problem.band_order``, form a banded block factored with a banded
        Cholesky. Without those hints the solve is dense.
        """
        is_free = np.zeros(len(self.y), dtype=bool)
        is_free[free] = True
        arrow = np.asarray(getattr(self.problem, "arrow", []), dtype=np.int64)
        order = getattr(self.problem, "band_order", None)
        if order is None:
            order = np.arange(len(self.y))
        in_arrow = np.zeros(len(self.y), dtype=bool)
        in_arrow[arrow] = True
        bf = np.asarray([i for i in order if is_free[i] and not in_arrow[i]], dtype=np.int64)
        af = arrow[is_free[arrow]]
        Hc = H.tocsc()
        A = Hc[bf][:, bf].tocoo()
        Bm = Hc[bf][:, af].toarray()
        Cm = Hc[af][:, af].toarray()
        rb, ra = r[bf], r[af]
        m = len(bf)
        low = A.row >= A.col
        bw = int(np.max(A.row[low] - A.col[low], initial=0))
        ab = np.zeros((bw + 1, m))
        ab[A.row[low] - A.col[low], A.col[low]] = A.data[low]
        diag_scale = max(1.0, float(np.max(np.abs(ab[0]), initial=1.0)))
        delta = self.delta_last / 4.0 if self.delta_last > 1e-8 * diag_scale else 0.0
        for _ in range(40):
            try:
                ab_d = ab.copy()
                ab_d[0] += delta
                cf = la.cholesky_banded(ab_d, lower=True, check_finite=False)
                xb = la.cho_solve_banded((cf, True), rb, check_finite=False)
                if len(af):
                    Y = la.cho_solve_banded((cf, True), Bm, check_finite=False)
                    S = Cm + delta * np.eye(len(af)) - Bm.T @ Y
                    cs = la.cho_factor(S, check_finite=False)
                    wa = la.cho_solve(cs, ra - Bm.T @ xb, check_finite=False)
                    wb = xb - Y @ wa
                else:
                    wa = np.zeros(0)
                    wb = xb
                sol = np.zeros(len(self.y))
                sol[bf] = wb
                sol[af] = wa
                if np.all(np.isfinite(sol)):
                    self.delta_last = delta
                    return -sol[free]
            except la.LinAlgError:
                pass
            delta = 1e-8 * diag_scale if delta == 0.0 else delta * 10.0
        return -r[free]

    def _cauchy(self, H, lo, hi):
        """Generalized Cauchy step along the projected gradient path of the model."""
        g = self.g
        mu0 = 0.01

        def trial(t):
            s = np.minimum(np.maximum(self.y - t * g, lo), hi) - self.y
            return s, g @ s + 0.5 * s @ (H @ s)

        t = self.t_cauchy
        s, q = trial(t)
        if q <= mu0 * (g @ s):
            for _ in range(20):
                t2 = 10.0 * t
                s2, q2 = trial(t2)
                if q2 > mu0 * (g @ s2) or np.array_equal(s2, s):
                    break
                t, s, q = t2, s2, q2
        else:
            for _ in range(40):
                t *= 0.1
                s, q = trial(t)
                if q <= mu0 * (g @ s):
                    break
        self.t_cauchy = t
        return s, q

    def _subspace(self, H, s, q, lo, hi, rounds: int = 10):
        """Newton steps on the variables left free at the Cauchy point, with a projected search."""
        g = self.g
        mu0 = 0.01
        for _ in range(rounds):
            yc = self.y + s
            free = np.flatnonzero((yc > lo) & (yc < hi) & ~self.fixed)
            if len(free) == 0:
                break
            r = g + H @ s
            w = np.zeros_like(s)
            w[free] = self._solve_free(H, r, free)
            beta = 1.0
            moved = False
            for _ in range(20):
                sb = np.minimum(np.maximum(yc + beta * w, lo), hi) - self.y
                qb = g @ sb + 0.5 * sb @ (H @ sb)
                if qb <= q + mu0 * (r @ (sb - s)):
                    moved = True
                    break
                beta *= 0.5
            if not moved:
                break
            s, q = sb, qb
            if beta == 1.0:
                break
        return s, q

    def step_once(self):
        mi = self.options.max_inner
        if self.projected_gradient_norm() <= self.omega or (mi is not None and self.inner >= mi):
            self._outer_update()
        H = self._hessian()
        lo = np.maximum(self.lo, self.y - self.radius)
        hi = np.minimum(self.hi, self.y + self.radius)
        s, q = self._cauchy(H, lo, hi)
        s, q = self._subspace(H, s, q, lo, hi)
        self.iterations += 1
        self.inner += 1
        snorm = float(np.max(np.abs(s), initial=0.0))
        if q >= 0.0 or snorm == 0.0:
            self.radius = max(0.25 * self.radius, 1e-12)
            self.accepted = False
            return
        y_new = np.minimum(np.maximum(self.y + s, self.lo), self.hi)
        m_new, _ = self._merit_at(y_new)
        ratio = (self.merit - m_new) / (-q) if math.isfinite(m_new) else -np.inf
        if ratio < 0.25:
            self.radius = max(0.25 * snorm, 1e-12)
        elif ratio > 0.75 and snorm >= 0.99 * self.radius:
            self.radius = min(2.0 * self.radius, 1e6)
        self.accepted = ratio > 1e-4
        if self.accepted:
            self.y = y_new
            self._refresh()
            if not math.isfinite(self.merit) or not np.all(np.isfinite(self.g)):
                self.failed = True
            self.merit_log.append((self.stage, float(self.merit)))

    def run(self, k: int, should_stop=None) -> int:
        """Advance at most ``k`` iterations; ``should_stop()`` is polled after each."""
        done = 0
        while done < k and not self.failed:
            self.step_once()
            done += 1
            if should_stop is not None and should_stop():
                break
        return done

    @property
    def z(self) -> np.ndarray:
        return self._z(self.y)
