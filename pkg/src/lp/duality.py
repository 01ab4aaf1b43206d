"""Complementary-slackness and strong-duality checks on solved LPs."""
import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from src.core.errors import InstanceError
from src.core.settings import section
from src.lp.model import EQ, GE, LE

# --- Configuration ---
TOL_CS = section("lp")["tol_cs"]

logger = logging.getLogger(__name__)


@dataclass
class SlacknessReport:
    """Per-row and per-column slack x multiplier products of an optimal solution."""
    rows: pd.DataFrame
    columns: pd.DataFrame
    max_residual: float
    duality_gap: float
    tol_cs: float

    @property
    def passed(self):
        return self.max_residual <= self.tol_cs


def _row_slacks(model, x):
    activity = model.matrix() @ x
    rhs = np.array(model.rhs)
    slack = np.zeros(model.n_constraints)
    rel = np.array(model.relations)
    slack[rel == LE] = rhs[rel == LE] - activity[rel == LE]
    slack[rel == GE] = activity[rel == GE] - rhs[rel == GE]
    slack[rel == EQ] = 0.0
    return activity, slack


def check_complementary_slackness(model, solution, tol_cs=TOL_CS):
    """Reports slack x multiplier for every (row, dual) and (variable, reduced cost) pair."""
    if not solution.is_optimal:
        raise InstanceError(f"complementary slackness needs an optimal solution, got '{solution.status}'")
    x = solution.x
    activity, slack = _row_slacks(model, x)
    rows = pd.DataFrame({
        "row": model.row_names,
        "relation": model.relations,
        "activity": activity,
        "rhs": model.rhs,
        "slack": slack,
        "dual": solution.duals,
    })
    rows["product"] = np.abs(rows["slack"] * rows["dual"])

    lower = np.array(model.lower)
    upper = np.array(model.upper)
    lo_gap = np.where(np.isfinite(lower), x - lower, math.inf)
    up_gap = np.where(np.isfinite(upper), upper - x, math.inf)
    gap = np.minimum(lo_gap, up_gap)
    reduced = solution.reduced_costs
    columns = pd.DataFrame({
        "variable": model.var_names,
        "value": x,
        "reduced_cost": reduced,
        "bound_gap": gap,
    })
    columns["product"] = np.where(np.isfinite(gap), np.abs(reduced) * gap, np.abs(reduced))

    max_residual = float(max(rows["product"].max() if len(rows) else 0.0,
                             columns["product"].max() if len(columns) else 0.0))
    gap_value = math.nan
    if solution.dual_objective is not None:
        gap_value = abs(solution.objective - solution.dual_objective)
    if max_residual > tol_cs:
        worst = rows.loc[rows["product"].idxmax(), "row"] if len(rows) else "-"
        logger.warning(f"LP '{model.name}': slackness residual {max_residual:.2e} exceeds {tol_cs:.0e} (worst row {worst})")
    return SlacknessReport(rows, columns, max_residual, gap_value, tol_cs)


def strong_duality_holds(solution, tol_lp):
    """|primal − dual| ≤ tol·(1 + |objective|)."""
    if solution.dual_objective is None:
        return False
    return abs(solution.objective - solution.dual_objective) <= tol_lp * (1.0 + abs(solution.objective))
