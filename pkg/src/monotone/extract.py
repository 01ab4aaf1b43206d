"""Policy parameters read off an optimal Balance LP solution by complementary slackness."""
import logging
import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from src.core.errors import NoTightConstraint
from src.core.settings import section
from src.lp.duality import check_complementary_slackness
from src.lp.simplex import lp_solve
from src.monotone.balance_lp import MULTIPLAY, SWITCHING, build_balance_lp, check_variant, lambda_weight
from src.monotone.encodings import constraint_times

# --- Configuration ---
_MONOTONE = section("monotone")
TOL_H = _MONOTONE["tol_h"]
TOL_TIGHT = _MONOTONE["tol_tight"]
TOL_CS = section("lp")["tol_cs"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ArmBalance:
    h: float
    p: Tuple[float, ...]
    delta_p: Tuple[float, ...]
    t_tight: Tuple[float, ...]
    good: Tuple[bool, ...]
    active: bool
    trivial: bool
    continuous: bool

    @property
    def good_states(self):
        return [k for k, g in enumerate(self.good) if g]

    @property
    def ready_states(self):
        return [k for k, g in enumerate(self.good) if not g]


@dataclass(frozen=True)
class BalanceSolution:
    """λ, per-arm h and potentials, tight times, G/I partition and the U1/U2 split."""
    variant: str
    lam: float
    objective: float
    arms: Tuple[ArmBalance, ...]
    residual: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def h(self):
        return np.array([a.h for a in self.arms])

    @property
    def u1(self):
        return [i for i, a in enumerate(self.arms) if a.active and a.continuous]

    @property
    def u2(self):
        return [i for i, a in enumerate(self.arms) if a.active and not a.continuous]

    def balance_gap(self, M=1):
        weight = M if self.variant == MULTIPLAY else 1
        return abs(weight * self.lam - float(self.h.sum()))


def _recurrent_classes(P):
    n_comp, labels = connected_components(csr_matrix(P > 0), directed=True, connection="strong")
    classes = []
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        leaves = P[np.ix_(members, np.setdiff1d(np.arange(len(P)), members))].sum() if len(members) < len(P) else 0.0
        if leaves <= 1e-15:
            classes.append(members)
    return classes


def _reachable(P, start):
    seen = {start}
    frontier = [start]
    while frontier:
        k = frontier.pop()
        for j in np.flatnonzero(P[k] > 0):
            if j not in seen:
                seen.add(int(j))
                frontier.append(int(j))
    return seen


def always_play_average(arm):
    """Worst long-run reward per unit time of playing the arm back to back, over recurrent
    classes reachable from its initial state."""
    n = arm.n_states
    P = np.zeros((n, n))
    for k, state in enumerate(arm.states):
        f1 = state.escape(1)
        P[k] = f1 * arm.q[k]
        P[k, k] += 1.0 - f1 * arm.q[k].sum()
    reachable = _reachable(P, arm.initial_state)
    reward = np.array([s.reward for s in arm.states])
    duration = np.array([s.duration for s in arm.states], dtype=float)
    worst = math.inf
    for members in _recurrent_classes(P):
        if int(members[0]) not in reachable:
            continue
        sub = P[np.ix_(members, members)]
        m = len(members)
        A = np.vstack([sub.T - np.eye(m), np.ones(m)])
        b = np.zeros(m + 1)
        b[-1] = 1.0
        pi = np.linalg.lstsq(A, b, rcond=None)[0]
        worst = min(worst, float(pi @ reward[members]) / float(pi @ duration[members]))
    return worst


def _row_slack(solution, model, name):
    row = model.rows[model.row(name)]
    activity = sum(coef * solution.x[j] for j, coef in row.items())
    rhs = model.rhs[model.row(name)]
    return activity - rhs, rhs


def extract_policy_params(instance, lp_solution, variant, model=None, tol_h=TOL_H, tol_tight=TOL_TIGHT,
                          tol_cs=TOL_CS):
    """Derives ΔP, tight times, the G/I partition and continuous-play arms from an optimal solve."""
    check_variant(instance, variant)
    model = model or build_balance_lp(instance, variant)
    lam = lp_solution.value("lambda")
    arms = []
    for i, arm in enumerate(instance.arms):
        h = lp_solution.value(f"h_{i}")
        p = np.array([lp_solution.value(f"p_{i}_{k}") for k in range(arm.n_states)])
        dp = arm.delta_p(p)
        active = h > tol_h
        t_tight, good = [], []
        missing = False
        for k in range(arm.n_states):
            tight_t, stick = math.inf, False
            for t in constraint_times(arm, k):
                slack, rhs = _row_slack(lp_solution, model, f"play_{i}_{k}_{t}")
                play_tight = slack <= tol_tight * (1.0 + abs(rhs))
                stick_tight = False
                if variant == SWITCHING:
                    s_slack, s_rhs = _row_slack(lp_solution, model, f"stick_{i}_{k}_{t}")
                    stick_tight = s_slack <= tol_tight * (1.0 + abs(s_rhs))
                if play_tight or stick_tight:
                    tight_t, stick = t, stick_tight
                    break
            if tight_t == math.inf:
                missing = True
            t_tight.append(tight_t)
            good.append(stick if variant == SWITCHING else bool(dp[k] < -tol_cs))
        trivial = False
        if active:
            trivial = always_play_average(arm) >= lam + h - tol_tight * (1.0 + lam + h)
        continuous = active and trivial and (variant == MULTIPLAY or missing)
        if active and missing and not trivial:
            raise NoTightConstraint(
                f"arm {i}: h = {h:.3e} but some state has no tight constraint and no continuous-play certificate")
        if active and not continuous:
            for k in range(arm.n_states):
                if good[k] and variant != SWITCHING and t_tight[k] != 1:
                    logger.warning(f"arm {i} state {k}: dP < 0 but tight time {t_tight[k]} != 1")
        arms.append(ArmBalance(h, tuple(p), tuple(dp), tuple(t_tight), tuple(good), active, trivial, continuous))

    report = check_complementary_slackness(model, lp_solution, tol_cs)
    solution = BalanceSolution(variant, lam, lp_solution.objective, tuple(arms), report.max_residual)
    logger.info(f"Balance LP ({variant}): lambda = {lam:.10g}, objective = {lp_solution.objective:.10g}, "
                f"{sum(a.active for a in arms)} active arms, U1 = {solution.u1}")
    return solution


def solve_balance(instance, variant=None):
    """Builds, solves and extracts the Balance LP in one call."""
    variant = variant or instance.default_variant()
    model = build_balance_lp(instance, variant)
    solution = lp_solve(model)
    return extract_policy_params(instance, solution, variant, model=model)


def objective_weight(instance, variant):
    return lambda_weight(instance, variant)
