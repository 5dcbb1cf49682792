"""Dense convex QP solver.

    minimize    1/2 z' P z + g' z
    subject to  A z = b,   G z <= h,   lo <= z <= hi

Dual active-set method: start at the unconstrained minimum, repeatedly add
the most violated constraint, taking partial steps that drop blocking
constraints whose multipliers would go negative. Strictly convex problems
terminate in finitely many steps; P is regularized to keep it that way.

Warm starting seeds the working set from a previous solution, which makes
re-solves of slowly changing problems (the 1 kHz control loop) cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.linalg import LinAlgError


@dataclass
class QpProblem:
    P: np.ndarray
    g: np.ndarray
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    G: np.ndarray | None = None
    h: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    def validate(self) -> None:
        n = self.g.shape[0]
        if self.P.shape != (n, n):
            raise ValueError("P/g dimension mismatch")
        if np.max(np.abs(self.P - self.P.T)) > 1e-10:
            raise ValueError("P must be symmetric")
        for M, r, what in ((self.A, self.b, "A/b"), (self.G, self.h, "G/h")):
            if (M is None) != (r is None):
                raise ValueError(f"{what}: matrix and rhs must come together")
            if M is not None and (M.shape[1] != n or M.shape[0] != r.shape[0]):
                raise ValueError(f"{what} dimension mismatch")


@dataclass
class QpSettings:
    tol: float = 1e-6
    max_iter: int = 200
    reg: float = 1e-9


@dataclass
class QpSolution:
    z: np.ndarray
    lam: np.ndarray            # equality multipliers
    mu: np.ndarray             # inequality multipliers (includes box rows)
    status: str                # optimal | max_iter | infeasible
    iterations: int
    primal_residual: float
    dual_residual: float
    active_set: tuple[int, ...] = ()   # inequality rows active at the solution

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


class QpSolver:
    """Reusable solver; holds settings, no state between solves."""

    def __init__(self, settings: QpSettings | None = None):
        self.settings = settings or QpSettings()

    def solve(self, prob: QpProblem,
              warm_set: tuple[int, ...] | None = None) -> QpSolution:
        prob.validate()
        st = self.settings
        n = prob.g.shape[0]

        # assemble constraints in the internal form  n_i' z >= r_i
        normals = []
        rhs = []
        if prob.A is not None:
            for i in range(prob.A.shape[0]):
                normals.append(prob.A[i])
                rhs.append(prob.b[i])
        n_eq = len(normals)
        if prob.G is not None:
            for i in range(prob.G.shape[0]):
                normals.append(-prob.G[i])
                rhs.append(-prob.h[i])
        if prob.lo is not None:
            for i in np.flatnonzero(np.isfinite(prob.lo)):
                e = np.zeros(n)
                e[i] = 1.0
                normals.append(e)
                rhs.append(prob.lo[i])
        if prob.hi is not None:
            for i in np.flatnonzero(np.isfinite(prob.hi)):
                e = np.zeros(n)
                e[i] = -1.0
                normals.append(e)
                rhs.append(-prob.hi[i])
        N_all = np.array(normals) if normals else np.zeros((0, n))
        r_all = np.array(rhs)
        m_all = N_all.shape[0]
        n_ineq = m_all - n_eq

        Preg = prob.P + st.reg * np.eye(n)
        try:
            Lchol = np.linalg.cholesky(Preg)
        except LinAlgError:
            raise ValueError("P is not positive semidefinite")

        def p_solve(rhs_vec):
            y = np.linalg.solve(Lchol, rhs_vec)
            return np.linalg.solve(Lchol.T, y)

        # project constraint normals through P^-1 lazily: warm-started
        # re-solves that keep their active set never pay for the full set
        x_free = p_solve(-prob.g)
        PiAll: np.ndarray | None = None

        def projected():
            nonlocal PiAll
            if PiAll is None:
                PiAll = p_solve(N_all.T) if m_all else np.zeros((n, 0))
            return PiAll

        x = x_free.copy()
        W: list[int] = []            # active constraint indices
        u = np.zeros(0)              # their multipliers
        sign = np.ones(m_all)        # equality rows may be flipped on entry
        iters = 0
        status = "optimal"

        def directions(p):
            Pi = projected()
            pin = sign[p] * Pi[:, p]
            if not W:
                return pin, np.zeros(0)
            sw = sign[W]
            NwT = N_all[W] * sw[:, None]
            PiNw = Pi[:, W] * sw[None, :]
            B = NwT @ PiNw
            r = np.linalg.solve(B, NwT @ pin)
            return pin - PiNw @ r, r

        def slacks():
            return N_all @ x - r_all

        # ---- warm start: seed the working set, then repair multiplier signs
        if warm_set is not None and (n_eq or len(warm_set)):
            W = list(range(n_eq)) + [n_eq + k for k in warm_set if k < n_ineq]
            while True:
                iters += 1
                NwT = N_all[W]
                PiNw = p_solve(NwT.T)
                B = NwT @ PiNw
                try:
                    u = np.linalg.solve(B, r_all[W] - NwT @ x_free)
                except LinAlgError:
                    W, u = [], np.zeros(0)   # degenerate seed: cold start
                    x = x_free.copy()
                    break
                x = x_free + PiNw @ u
                neg = [i for i in range(len(W)) if W[i] >= n_eq and u[i] < -st.tol]
                if not neg:
                    break
                worst = min(neg, key=lambda i: u[i])
                W.pop(worst)
                if not W:
                    x = x_free.copy()
                    u = np.zeros(0)
                    break

        # ---- equality constraints enter first and never leave
        order = list(range(n_eq)) + []
        pending_eq = [k for k in order if k not in W]

        def add_constraint(p, is_eq):
            nonlocal x, u, iters, status
            npv = N_all[p] * sign[p]
            s = float(npv @ x - sign[p] * r_all[p])
            if is_eq and s > 0:
                sign[p] = -1.0
                npv = -npv
                s = -s
            up = 0.0
            while True:
                iters += 1
                if iters > st.max_iter:
                    status = "max_iter"
                    return False
                zdir, r = directions(p)
                denom = float(npv @ zdir)
                t1, k1 = np.inf, -1
                for i in range(len(W)):
                    if W[i] >= n_eq and r[i] > st.tol:
                        cand = u[i] / r[i]
                        if cand < t1 - 1e-14:
                            t1, k1 = cand, i
                if denom > 1e-12 * max(1.0, float(npv @ npv)):
                    t2 = -s / denom
                else:
                    t2 = np.inf
                t = min(t1, t2)
                if not np.isfinite(t):
                    if abs(s) <= st.tol:
                        return True   # dependent but consistent; skip
                    status = "infeasible"
                    return False
                if t2 == np.inf:
                    u = u - t * r
                    up += t
                    W.pop(k1)
                    u = np.delete(u, k1)
                    continue
                x = x + t * zdir
                u = u - t * r
                up += t
                s = float(npv @ x - sign[p] * r_all[p])
                if t == t2:
                    W.append(p)
                    u = np.append(u, up)
                    return True
                W.pop(k1)
                u = np.delete(u, k1)

        for p in pending_eq:
            if not add_constraint(p, True):
                return self._finish(prob, x, W, u, sign, n_eq, status, iters)

        # ---- main loop: add most violated inequality until none remain
        while status == "optimal" and n_ineq > 0:
            s = slacks()
            s[W] = 0.0
            s[:n_eq] = 0.0
            p = int(np.argmin(s))
            if s[p] >= -st.tol:
                break
            if iters > st.max_iter:
                status = "max_iter"
                break
            if not add_constraint(p, False):
                break

        return self._finish(prob, x, W, u, sign, n_eq, status, iters)

    def _finish(self, prob, x, W, u, sign, n_eq, status, iters) -> QpSolution:
        n = prob.g.shape[0]
        me = prob.A.shape[0] if prob.A is not None else 0
        mi = prob.G.shape[0] if prob.G is not None else 0
        nbox = 0
        if prob.lo is not None:
            nbox += int(np.sum(np.isfinite(prob.lo)))
        if prob.hi is not None:
            nbox += int(np.sum(np.isfinite(prob.hi)))
        lam = np.zeros(me)
        mu = np.zeros(mi + nbox)
        active = []
        for idx, k in enumerate(W):
            if k < n_eq:
                lam[k] = -sign[k] * u[idx]
            else:
                mu[k - n_eq] = u[idx]
                active.append(k - n_eq)

        grad = prob.P @ x + prob.g
        if me:
            grad += prob.A.T @ lam
        if mi:
            grad += prob.G.T @ mu[:mi]
        # box rows fold into the gradient with +/- unit normals
        col = mi
        if prob.lo is not None:
            for i in np.flatnonzero(np.isfinite(prob.lo)):
                grad[i] -= mu[col]
                col += 1
        if prob.hi is not None:
            for i in np.flatnonzero(np.isfinite(prob.hi)):
                grad[i] += mu[col]
                col += 1

        primal = 0.0
        if me:
            primal = max(primal, float(np.max(np.abs(prob.A @ x - prob.b))))
        if mi:
            primal = max(primal, float(np.max(prob.G @ x - prob.h, initial=0.0)))
        if prob.lo is not None:
            primal = max(primal, float(np.max(prob.lo - x, initial=0.0)))
        if prob.hi is not None:
            primal = max(primal, float(np.max(x - prob.hi, initial=0.0)))

        return QpSolution(
            z=x, lam=lam, mu=mu, status=status, iterations=iters,
            primal_residual=primal,
            dual_residual=float(np.max(np.abs(grad))),
            active_set=tuple(sorted(active)),
        )


def solve_qp(prob: QpProblem, settings: QpSettings | None = None,
             warm_set: tuple[int, ...] | None = None) -> QpSolution:
    return QpSolver(settings).solve(prob, warm_set=warm_set)
