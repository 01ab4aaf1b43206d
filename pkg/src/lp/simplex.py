"""Bounded revised simplex solver returning primal values, duals and residuals.

The model is brought to computational form ``min c.x, A x = b, l <= x <= u``:
a ``<=`` row gets a slack with coefficient +1, a ``>=`` row a slack with -1,
and a maximisation negates ``c``. Phase 1 starts from a crash basis of slacks
and artificials; pricing is Dantzig's rule, switching to Bland's lowest-index
rule after a degenerate pivot so the pivot sequence is deterministic and
cannot cycle. The ratio test is Harris's two-pass test with a pivot threshold
relative to the entering column.

A basis that loses rank at refactorisation is repaired: the dependent columns
are parked at their current values and unit artificials take their place. If
an artificial then carries a positive value, Phase 1 is entered again.

Dual values are reported as the derivative of the objective with respect to
the right-hand side in the model's own sense, so ``max x s.t. x <= 3`` has
dual 1 on its row.
"""
import logging
import math
from pathlib import Path

import numpy as np
import scipy.linalg

from src.core.errors import Infeasible, NumericFailure, Unbounded
from src.core.settings import section
from src.lp.model import EQ, GE, LE, MAX, LpSolution

# --- Configuration ---
_LP = section("lp")
TOL_LP = _LP["tol_lp"]
PIVOT_TOL = _LP["pivot_tol"]
REFACTOR_EVERY = _LP["refactor_every"]
MAX_ITERATIONS = _LP["max_iterations"]
MAX_RESTARTS = _LP["max_restarts"]
FEASIBILITY_TOL = 1e-8
HARRIS_TOL = 1e-10
PIVOT_REL_TOL = 1e-9
RANK_TOL = 1e-10
DRIVE_OUT_TOL = 1e-7
_dump_dir = _LP["dump_dir"]

AT_LOWER, AT_UPPER, AT_ZERO, BASIC, SUPERBASIC = 0, 1, 2, 3, 4

logger = logging.getLogger(__name__)


def enable_lp_dump(path):
    """Writes every model solved from now on to ``path/<model name>.lp``."""
    global _dump_dir
    _dump_dir = str(path) if path is not None else None


class _PivotBreakdown(Exception):
    pass


class _LostFeasibility(Exception):
    pass


def _computational_form(model):
    m, n = model.n_constraints, model.n_variables
    slack_rows = [i for i in range(m) if model.relations[i] != EQ]
    n_real = n + len(slack_rows)
    A = np.zeros((m, n_real))
    A[:, :n] = model.dense() if m and n else 0.0
    slack_col = np.full(m, -1)
    for k, i in enumerate(slack_rows):
        slack_col[i] = n + k
        A[i, n + k] = 1.0 if model.relations[i] == LE else -1.0
    c = np.zeros(n_real)
    c[:n] = model.costs
    if model.sense == MAX:
        c = -c
    lower = np.concatenate([np.array(model.lower, dtype=float), np.zeros(len(slack_rows))])
    upper = np.concatenate([np.array(model.upper, dtype=float), np.full(len(slack_rows), math.inf)])
    b = np.array(model.rhs, dtype=float)
    return A, b, c, lower, upper, slack_col


def _uncovered_rows(Q, count):
    """Rows whose unit vectors extend the span of the orthonormal columns ``Q``."""
    span = Q
    rows = []
    for _ in range(count):
        weight = 1.0 - np.einsum("ij,ij->i", span, span)
        weight[rows] = -math.inf
        i = int(np.argmax(weight))
        e = -(span @ span[i])
        e[i] += 1.0
        span = np.column_stack([span, e / np.linalg.norm(e)])
        rows.append(i)
    return rows


class _BoundedSimplex:
    def __init__(self, A, b, c, lower, upper, slack_col, tol, pivot_tol, refactor_every, max_iterations):
        self.m, self.n_real = A.shape
        self.b = b
        self.c = c
        self.tol = tol
        self.pivot_tol = pivot_tol
        self.refactor_every = refactor_every
        self.max_iterations = max_iterations
        self.feasibility_tol = FEASIBILITY_TOL * (1.0 + np.abs(b).max(initial=0.0))
        self.iterations = 0
        self.restarts = 0
        self.repairs = 0
        self._crash(A, lower, upper, slack_col)

    def _crash(self, A, lower, upper, slack_col):
        m = self.m
        x = np.where(np.isfinite(lower), lower, np.where(np.isfinite(upper), upper, 0.0))
        status = np.where(np.isfinite(lower), AT_LOWER, np.where(np.isfinite(upper), AT_UPPER, AT_ZERO))
        residual = self.b - A @ x
        basis = np.empty(m, dtype=int)
        art_cols = []
        diag = np.empty(m)
        for i in range(m):
            j = slack_col[i]
            if j >= 0 and residual[i] / A[i, j] >= 0.0:
                basis[i] = j
                diag[i] = A[i, j]
                x[j] = residual[i] / A[i, j]
            else:
                sign = 1.0 if residual[i] >= 0.0 else -1.0
                basis[i] = self.n_real + len(art_cols)
                art_cols.append((i, sign))
                diag[i] = sign
        n_art = len(art_cols)
        art = np.zeros((m, n_art))
        x_art = np.zeros(n_art)
        for k, (i, sign) in enumerate(art_cols):
            art[i, k] = sign
            x_art[k] = abs(residual[i])
        self.A = np.hstack([A, art])
        self.lower = np.concatenate([lower, np.zeros(n_art)])
        self.upper = np.concatenate([upper, np.full(n_art, math.inf)])
        self.x = np.concatenate([x, x_art])
        self.status = np.concatenate([status, np.full(n_art, AT_LOWER)])
        self.status[basis] = BASIC
        self.basis = basis
        self.n_art = n_art
        self.art_row = np.array([i for i, _ in art_cols], dtype=int)
        self.phase = 1 if n_art else 2
        self.Binv = np.diag(1.0 / diag) if m else np.zeros((0, 0))
        self.since_refactor = 0

    def _cost(self):
        cost = np.zeros(self.n_real + self.n_art)
        if self.phase == 1:
            cost[self.n_real:] = 1.0
        else:
            cost[:self.n_real] = self.c
        return cost

    def _invertible(self, B, Binv):
        v = np.linspace(1.0, 2.0, self.m)
        err = np.abs(B @ (Binv @ v) - v).max(initial=0.0)
        return bool(np.isfinite(err)) and err <= 1e-7

    def _refactor(self):
        B = self.A[:, self.basis]
        try:
            Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            Binv = None
        if Binv is None or not self._invertible(B, Binv):
            Binv = self._repair_basis()
        self.Binv = Binv
        x_n = self.x.copy()
        x_n[self.basis] = 0.0
        self.x[self.basis] = self.Binv @ (self.b - self.A @ x_n)
        self.since_refactor = 0
        # artificials are unit columns, so a negative one is flipped in place
        for pos in np.flatnonzero((self.basis >= self.n_real) & (self.x[self.basis] < 0.0)):
            k = self.basis[pos]
            self.A[:, k] = -self.A[:, k]
            self.x[k] = -self.x[k]
            self.Binv[pos] = -self.Binv[pos]
        if self.phase == 2 and self.n_art:
            worst = self.x[self.n_real:].max()
            if worst > self.feasibility_tol:
                raise _LostFeasibility(f"artificial at {worst:.3e} after refactorisation")

    def _repair_basis(self):
        """Replaces dependent basic columns by unit artificials and returns the new inverse."""
        Q, R, piv = scipy.linalg.qr(self.A[:, self.basis], mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int(np.count_nonzero(diag > RANK_TOL * diag[0])) if diag[0] > 0.0 else 0
        rank = min(rank, self.m - 1)
        rows = _uncovered_rows(Q[:, :rank], self.m - rank)
        for pos, i in zip(piv[rank:], rows):
            self._park(self.basis[pos])
            k = self._artificial_for_row(i)
            self.basis[pos] = k
            self.status[k] = BASIC
        self.repairs += 1
        logger.warning(f"Simplex basis lost rank ({rank} of {self.m}); replaced {self.m - rank} columns with artificials")
        return np.linalg.inv(self.A[:, self.basis])

    def _park(self, j):
        lo, up = self.lower[j], self.upper[j]
        v = min(max(self.x[j], lo), up)
        if math.isfinite(lo) and v - lo <= FEASIBILITY_TOL:
            self.x[j], self.status[j] = lo, AT_LOWER
        elif math.isfinite(up) and up - v <= FEASIBILITY_TOL:
            self.x[j], self.status[j] = up, AT_UPPER
        else:
            self.x[j], self.status[j] = v, SUPERBASIC

    def _artificial_for_row(self, i):
        for k in np.flatnonzero(self.art_row == i):
            col = self.n_real + int(k)
            if self.status[col] != BASIC:
                self.A[:, col] = 0.0
                self.A[i, col] = 1.0
                return col
        unit = np.zeros((self.m, 1))
        unit[i, 0] = 1.0
        self.A = np.hstack([self.A, unit])
        self.lower = np.append(self.lower, 0.0)
        self.upper = np.append(self.upper, math.inf if self.phase == 1 else 0.0)
        self.x = np.append(self.x, 0.0)
        self.status = np.append(self.status, AT_LOWER)
        self.art_row = np.append(self.art_row, i)
        self.n_art += 1
        return self.A.shape[1] - 1

    def _eligible(self, d):
        nonbasic = self.status != BASIC
        movable = self.upper > self.lower
        inc = nonbasic & movable & (self.status == AT_LOWER) & (d < -self.tol)
        dec = nonbasic & movable & (self.status == AT_UPPER) & (d > self.tol)
        free = nonbasic & ((self.status == AT_ZERO) | (self.status == SUPERBASIC)) & (np.abs(d) > self.tol)
        return inc | dec | free

    def _pivot(self, r, j, w):
        if abs(w[r]) < self.pivot_tol:
            raise _PivotBreakdown(f"pivot element {w[r]:.3e} below tolerance")
        pivot_row = self.Binv[r] / w[r]
        self.Binv -= np.outer(w, pivot_row)
        self.Binv[r] = pivot_row
        self.basis[r] = j
        self.status[j] = BASIC
        self.since_refactor += 1

    def _run_phase(self):
        bland = False
        while True:
            if self.iterations >= self.max_iterations:
                raise NumericFailure(f"simplex iteration cap {self.max_iterations} reached")
            if self.since_refactor >= self.refactor_every:
                self._refactor()
            cost = self._cost()
            y = cost[self.basis] @ self.Binv
            d = cost - y @ self.A
            d[self.basis] = 0.0
            eligible = np.flatnonzero(self._eligible(d))
            if eligible.size == 0:
                return
            if bland:
                j = int(eligible[0])
            else:
                j = int(eligible[np.argmax(np.abs(d[eligible]))])
            direction = 1.0 if d[j] < 0 else -1.0
            w = self.Binv @ self.A[:, j]
            delta = -direction * w
            xb = self.x[self.basis]
            lb = self.lower[self.basis]
            ub = self.upper[self.basis]
            threshold = max(self.pivot_tol, PIVOT_REL_TOL * np.abs(delta).max(initial=0.0))
            rising = delta > threshold
            falling = delta < -threshold
            ratios = np.full(self.m, math.inf)
            relaxed = np.full(self.m, math.inf)
            with np.errstate(invalid="ignore"):
                ratios[rising] = (ub[rising] - xb[rising]) / delta[rising]
                ratios[falling] = (xb[falling] - lb[falling]) / -delta[falling]
                relaxed[rising] = (ub[rising] - xb[rising] + HARRIS_TOL) / delta[rising]
                relaxed[falling] = (xb[falling] - lb[falling] + HARRIS_TOL) / -delta[falling]
            ratios = np.maximum(np.where(np.isnan(ratios), math.inf, ratios), 0.0)
            relaxed = np.where(np.isnan(relaxed), math.inf, relaxed)

            r = None
            theta_basic = math.inf
            theta_max = max(relaxed.min(), 0.0) if self.m else math.inf
            if math.isfinite(theta_max):
                if bland:
                    rows = np.flatnonzero(ratios <= ratios.min() + 1e-12)
                    r = int(rows[np.argmin(self.basis[rows])])
                else:
                    rows = np.flatnonzero(ratios <= theta_max)
                    r = int(rows[np.argmax(np.abs(delta[rows]))])
                theta_basic = ratios[r]
            theta_flip = self.upper[j] - self.x[j] if direction > 0 else self.x[j] - self.lower[j]
            if not math.isfinite(theta_basic) and not math.isfinite(theta_flip):
                raise Unbounded(f"objective unbounded along column {j}")
            self.iterations += 1
            if theta_flip <= theta_basic:
                self.x[self.basis] = xb + delta * theta_flip
                self.x[j] += direction * theta_flip
                self.status[j] = AT_UPPER if direction > 0 else AT_LOWER
                bland = False
                continue
            leaving = self.basis[r]
            self.x[self.basis] = xb + delta * theta_basic
            self.x[j] += direction * theta_basic
            if delta[r] > 0:
                self.x[leaving] = self.upper[leaving]
                self.status[leaving] = AT_UPPER
            else:
                self.x[leaving] = self.lower[leaving]
                self.status[leaving] = AT_LOWER
            self._pivot(r, j, w)
            bland = theta_basic <= 1e-12

    def _run_with_restarts(self):
        while True:
            try:
                return self._run_phase()
            except _PivotBreakdown as e:
                self.restarts += 1
                logger.warning(f"Simplex pivot breakdown ({e}); refactorising, restart {self.restarts}")
                if self.restarts > MAX_RESTARTS:
                    raise NumericFailure(f"pivot tolerance breached after {MAX_RESTARTS} restarts: {e}")
                self._refactor()

    def _drive_out_artificials(self):
        for r in range(self.m):
            if self.basis[r] < self.n_real:
                continue
            row = self.Binv[r] @ self.A[:, :self.n_real]
            row[self.status[:self.n_real] == BASIC] = 0.0
            j = int(np.argmax(np.abs(row))) if self.n_real else 0
            if not self.n_real or abs(row[j]) <= DRIVE_OUT_TOL * max(1.0, np.abs(self.Binv[r]).max()):
                continue
            leaving = self.basis[r]
            w = self.Binv @ self.A[:, j]
            self.x[leaving] = 0.0
            self.status[leaving] = AT_LOWER
            self._pivot(r, j, w)
        self.upper[self.n_real:] = 0.0
        self.phase = 2
        self._refactor()

    def _phase_one(self):
        self.phase = 1
        self.upper[self.n_real:] = math.inf
        self._run_with_restarts()
        infeasibility = float(self.x[self.n_real:].sum())
        if infeasibility > self.feasibility_tol:
            raise Infeasible(f"phase 1 ended with infeasibility {infeasibility:.3e}")
        self._drive_out_artificials()

    def solve(self):
        reentries = 0
        while True:
            try:
                if self.phase == 1:
                    self._phase_one()
                self._run_with_restarts()
                self._refactor()
                break
            except _LostFeasibility as e:
                reentries += 1
                if reentries > MAX_RESTARTS:
                    raise NumericFailure(f"feasibility lost {reentries} times after basis repair: {e}")
                logger.warning(f"Simplex feasibility lost ({e}); re-entering phase 1")
                self.phase = 1
        cost = self._cost()
        y = cost[self.basis] @ self.Binv
        d = cost - y @ self.A
        d[self.basis] = 0.0
        return self.x[:self.n_real].copy(), y, d[:self.n_real]


def _residuals(model, A, b, x_all, d, lower, upper):
    n = model.n_variables
    activity = A[:, :n] @ x_all[:n] if model.n_constraints else np.zeros(0)
    rel = np.array(model.relations)
    viol = np.zeros(model.n_constraints)
    viol[rel == LE] = np.maximum(0.0, activity[rel == LE] - b[rel == LE])
    viol[rel == GE] = np.maximum(0.0, b[rel == GE] - activity[rel == GE])
    viol[rel == EQ] = np.abs(activity[rel == EQ] - b[rel == EQ])
    bound_viol = np.maximum(np.maximum(0.0, lower - x_all), np.maximum(0.0, x_all - upper))
    primal = float(max(viol.max(initial=0.0), bound_viol.max(initial=0.0)))

    lo_gap = np.where(np.isfinite(lower), x_all - lower, math.inf)
    up_gap = np.where(np.isfinite(upper), upper - x_all, math.inf)
    at_lo = lo_gap <= 1e-9 * (1.0 + np.abs(np.where(np.isfinite(lower), lower, 0.0)))
    at_up = up_gap <= 1e-9 * (1.0 + np.abs(np.where(np.isfinite(upper), upper, 0.0)))
    dual_viol = np.where(at_lo & at_up, 0.0,
                         np.where(at_lo, np.maximum(0.0, -d),
                                  np.where(at_up, np.maximum(0.0, d), np.abs(d))))
    dual = float(dual_viol.max(initial=0.0))
    gap = np.minimum(lo_gap, up_gap)
    cs = np.where(np.isfinite(gap), np.abs(d) * gap, np.abs(d))
    return primal, dual, float(cs.max(initial=0.0))


def lp_solve(model, tol_lp=TOL_LP, pivot_tol=PIVOT_TOL, refactor_every=REFACTOR_EVERY,
             max_iterations=MAX_ITERATIONS, raise_on_failure=True):
    """Solves an LpModel to an optimal vertex with duals and residuals."""
    if _dump_dir:
        path = Path(_dump_dir) / f"{model.name}.lp"
        model.write_lp(path)
        logger.debug(f"LP '{model.name}' written to {path}")
    A, b, c, lower, upper, slack_col = _computational_form(model)
    solver = _BoundedSimplex(A, b, c, lower, upper, slack_col, tol_lp, pivot_tol, refactor_every, max_iterations)
    try:
        x_all, y, d = solver.solve()
    except (Infeasible, Unbounded) as e:
        if raise_on_failure:
            raise
        status = "infeasible" if isinstance(e, Infeasible) else "unbounded"
        n = model.n_variables
        return LpSolution(status, math.nan, np.full(n, math.nan), np.full(model.n_constraints, math.nan),
                          np.full(n, math.nan), math.inf, math.inf, math.inf, solver.iterations,
                          tuple(model.var_names), tuple(model.row_names))

    primal_res, dual_res, cs_res = _residuals(model, A, b, x_all, d, lower, upper)
    n = model.n_variables
    objective = float(c @ x_all)
    nonbasic_terms = float(d @ x_all)
    dual_objective = float(y @ b) + nonbasic_terms
    if model.sense == MAX:
        objective, dual_objective = -objective, -dual_objective
        duals, reduced = -y, -d[:n]
    else:
        duals, reduced = y, d[:n]
    worst = max(primal_res, dual_res, cs_res)
    if worst > tol_lp:
        logger.warning(f"LP '{model.name}': residuals primal={primal_res:.2e} dual={dual_res:.2e} cs={cs_res:.2e} exceed {tol_lp:.0e}")
    logger.debug(f"LP '{model.name}' solved: objective={objective:.10g}, {solver.iterations} iterations")
    return LpSolution("optimal", objective, x_all[:n].copy(), np.asarray(duals, dtype=float),
                      np.asarray(reduced, dtype=float), primal_res, dual_res, cs_res, solver.iterations,
                      tuple(model.var_names), tuple(model.row_names), dual_objective)
