"""Dense bounded-variable primal simplex.

Rows are turned into equalities with one slack per row (``a x + s = b`` with
the slack's bounds encoding the sense), so every variable carries its own
bounds and nonbasic variables sit at a finite bound (or at zero if free).
Phase 1 minimizes the sum of artificials on rows whose slack cannot start
basic.  Entering variables follow Dantzig's rule and switch to Bland's rule
after a run of degenerate pivots, which rules out cycling.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .model import MilpModel, MilpSolution, Sense, SolveStats, Status

FEAS_TOL = 1e-7
OPT_TOL = 1e-7
PIVOT_TOL = 1e-9
DEGENERATE_RUN = 30


@dataclass
class LPResult:
    status: Status
    x: np.ndarray | None
    objective: float
    iterations: int


@dataclass
class StandardForm:
    """``A z = b`` with bounds on ``z = (x, slacks)``; slack of row i is column n + i."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    n_struct: int
    constant: float = 0.0

    @classmethod
    def from_model(cls, model: MilpModel) -> StandardForm:
        n, m = model.n_vars, model.n_constraints
        A = np.zeros((m, n + m))
        b = np.zeros(m)
        lo = np.empty(n + m)
        hi = np.empty(n + m)
        lo[:n], hi[:n] = model.bounds()
        for i, con in enumerate(model.constraints):
            if con.indices:
                np.add.at(A[i], list(con.indices), con.coefs)
            A[i, n + i] = 1.0
            b[i] = con.rhs
            lo[n + i], hi[n + i] = {
                Sense.LE: (0.0, math.inf),
                Sense.GE: (-math.inf, 0.0),
                Sense.EQ: (0.0, 0.0),
            }[con.sense]
        c = np.zeros(n + m)
        c[:n] = model.cost_vector()
        return cls(c, A, b, lo, hi, n, model.objective.constant)


class _Tableau:
    def __init__(self, A, b, lo, hi, max_iter):
        self.m, n = A.shape
        self.n_orig = n
        self.lo = lo.copy()
        self.hi = hi.copy()
        self.b = b
        self.max_iter = max_iter
        self.iterations = 0

        x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
        m = self.m
        resid = b - A @ x if m else np.zeros(0)

        # Slack of row i is column n - m + i in the standard form.
        n_struct = n - m
        basis = np.empty(m, dtype=int)
        art_sign = np.ones(m)
        art_active = np.zeros(m, dtype=bool)
        for i in range(m):
            s = n_struct + i
            v = x[s] + resid[i]
            if lo[s] - FEAS_TOL <= v <= hi[s] + FEAS_TOL:
                basis[i] = s
                x[s] = v
            else:
                basis[i] = n + i
                art_active[i] = True
                art_sign[i] = 1.0 if resid[i] >= 0 else -1.0

        self.A = np.hstack([A, np.diag(art_sign)]) if m else A.copy()
        art_val = np.where(art_active, np.abs(resid), 0.0)
        self.x = np.concatenate([x, art_val])
        self.lo = np.concatenate([lo, np.zeros(m)])
        self.hi = np.concatenate([hi, np.where(art_active, math.inf, 0.0)])
        self.basis = basis
        self.is_basic = np.zeros(n + m, dtype=bool)
        self.is_basic[basis] = True
        self.art_active = art_active
        self.refactor()

    # -- linear algebra -------------------------------------------------------

    def refactor(self):
        """Recompute the tableau and basic values from the current basis."""
        if self.m == 0:
            self.T = np.zeros((0, self.A.shape[1]))
            return
        Bm = self.A[:, self.basis]
        self.T = np.linalg.solve(Bm, self.A)
        nonbasic = ~self.is_basic
        rhs = self.b - self.A[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = np.linalg.solve(Bm, rhs)

    def reduced_costs(self, c):
        return c - c[self.basis] @ self.T if self.m else c.copy()

    # -- simplex loop ---------------------------------------------------------

    def run(self, c, deadline=None):
        """Minimize ``c @ x`` from the current basis. Returns a Status."""
        d = self.reduced_costs(c)
        degenerate = 0
        since_refactor = 0
        refactor_every = max(50, self.m // 2)
        while True:
            if self.iterations >= self.max_iter or (deadline is not None and time.perf_counter() > deadline):
                return Status.ITERATION_LIMIT
            nb = ~self.is_basic
            can_inc = nb & (self.x < self.hi) & (d < -OPT_TOL)
            can_dec = nb & (self.x > self.lo) & (d > OPT_TOL)
            score = np.where(can_inc, -d, 0.0) + np.where(can_dec, d, 0.0)
            if not score.any():
                return Status.OPTIMAL
            bland = degenerate >= DEGENERATE_RUN
            q = int(np.flatnonzero(score)[0]) if bland else int(np.argmax(score))
            direction = 1.0 if can_inc[q] else -1.0

            alpha = direction * self.T[:, q]
            xb = self.x[self.basis]
            lob = self.lo[self.basis]
            hib = self.hi[self.basis]
            ratios = np.full(self.m, math.inf)
            pos = alpha > PIVOT_TOL
            neg = alpha < -PIVOT_TOL
            with np.errstate(invalid="ignore", divide="ignore"):
                ratios[pos] = (xb[pos] - lob[pos]) / alpha[pos]
                ratios[neg] = (hib[neg] - xb[neg]) / (-alpha[neg])
            ratios = np.where(np.isnan(ratios), math.inf, np.maximum(ratios, 0.0))
            flip = self.hi[q] - self.lo[q]
            theta = float(ratios.min()) if self.m else math.inf
            if math.isinf(theta) and math.isinf(flip):
                return Status.UNBOUNDED

            self.iterations += 1
            if flip <= theta:
                # Bound flip: the entering variable crosses to its other bound.
                self.x[self.basis] = xb - flip * alpha
                self.x[q] = self.hi[q] if direction > 0 else self.lo[q]
                degenerate = 0
                continue

            ties = np.flatnonzero(ratios <= theta + 1e-12)
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])
            leaving = self.basis[r]
            self.x[self.basis] = xb - theta * alpha
            self.x[q] += direction * theta
            self.x[leaving] = self.lo[leaving] if alpha[r] > 0 else self.hi[leaving]
            self._pivot(r, q)
            d = d - d[q] * self.T[r]
            degenerate = degenerate + 1 if theta <= 1e-12 else 0
            since_refactor += 1
            if since_refactor >= refactor_every:
                self.refactor()
                d = self.reduced_costs(c)
                since_refactor = 0

    def _pivot(self, r, q):
        leaving = self.basis[r]
        piv = self.T[r, q]
        self.T[r] /= piv
        col = self.T[:, q].copy()
        col[r] = 0.0
        self.T -= np.outer(col, self.T[r])
        self.basis[r] = q
        self.is_basic[leaving] = False
        self.is_basic[q] = True

    def drive_out_artificials(self):
        n = self.n_orig
        for r in range(self.m):
            if self.basis[r] < n:
                continue
            row = self.T[r, :n].copy()
            row[self.is_basic[:n]] = 0.0
            cand = np.flatnonzero(np.abs(row) > 1e-9)
            if cand.size:
                q = int(cand[np.argmax(np.abs(row[cand]))])
                leaving = self.basis[r]
                self._pivot(r, q)
                self.x[leaving] = 0.0
        self.hi[n:] = 0.0
        self.lo[n:] = 0.0


def solve_standard_form(sf: StandardForm, lo=None, hi=None, max_iter: int = 50_000, deadline=None) -> LPResult:
    lo = sf.lo if lo is None else lo
    hi = sf.hi if hi is None else hi
    if np.any(lo > hi + FEAS_TOL):
        return LPResult(Status.INFEASIBLE, None, math.inf, 0)
    tab = _Tableau(sf.A, sf.b, lo, hi, max_iter)
    n = sf.A.shape[1]
    if tab.art_active.any():
        c1 = np.zeros(n + tab.m)
        c1[n:][tab.art_active] = 1.0
        status = tab.run(c1, deadline)
        if status is Status.ITERATION_LIMIT:
            return LPResult(status, None, math.nan, tab.iterations)
        tab.refactor()
        infeas = float(tab.x[n:].sum())
        if infeas > FEAS_TOL * max(1.0, float(np.abs(sf.b).max(initial=0.0))):
            return LPResult(Status.INFEASIBLE, None, math.inf, tab.iterations)
        tab.drive_out_artificials()
        tab.refactor()
    c2 = np.concatenate([sf.c, np.zeros(tab.m)])
    status = tab.run(c2, deadline)
    tab.refactor()
    x = tab.x[: sf.n_struct].copy()
    if status is not Status.OPTIMAL:
        return LPResult(status, None, -math.inf if status is Status.UNBOUNDED else math.nan, tab.iterations)
    # Snap values sitting within tolerance of a bound.
    blo, bhi = lo[: sf.n_struct], hi[: sf.n_struct]
    x = np.where(np.abs(x - blo) <= FEAS_TOL, blo, x)
    x = np.where(np.abs(x - bhi) <= FEAS_TOL, bhi, x)
    obj = float(sf.c[: sf.n_struct] @ x) + sf.constant
    return LPResult(Status.OPTIMAL, x, obj, tab.iterations)


def lp_relaxation(model: MilpModel, max_iter: int = 50_000) -> MilpSolution:
    """Solve the model with binaries relaxed to [0, 1]."""
    t0 = time.perf_counter()
    res = solve_standard_form(StandardForm.from_model(model), max_iter=max_iter)
    stats = SolveStats(nodes=1, lp_pivots=res.iterations, wall_time=time.perf_counter() - t0, backend="simplex")
    stats.root_bound = stats.best_bound = res.objective
    return MilpSolution(res.status, res.x, res.objective, stats)
