"""Balanced LP for non-preemptive machine replenishment.

Primal (max Σ r_u x_u − c_u z_u) over state occupancies x_u, repair
admissions z_u (u ≠ ρ) and queue occupancy x_κ. The balance row M·λ = Σ h_i
of the dual enters the primal as a free column ω:

    Σ_i x_κi + M·ω              ≤ M       (dual λ)
    x_κi + Σ_u x_u − ω          ≤ 1       (dual h_i)
    out(u) − in(u) + z_u        = 0       (dual φ_u, u ≠ ρ_i)
    out(ρ) − in(ρ) − s_i·x_κi   = 0       (dual φ_ρ)
"""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.core.settings import section
from src.lp.model import EQ, LE, MAX, LpModel
from src.lp.simplex import lp_solve

# --- Configuration ---
TOL_Z = section("replenish")["tol_z"]
TOL_H = section("monotone")["tol_h"]
SLACKNESS_TOL = 1e-6

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MachineParams:
    h: float
    phi: Tuple[float, ...]
    x: Tuple[float, ...]
    z: Tuple[float, ...]
    x_kappa: float
    active: bool

    @property
    def triggers(self):
        """States from which the machine is sent to repair."""
        return frozenset(u for u, zu in enumerate(self.z) if zu > TOL_Z)


@dataclass(frozen=True)
class ReplenishParams:
    """λ, per-machine h_i, potentials φ_u (0 at the queue state) and the primal support."""
    lam: float
    objective: float
    omega: float
    M: int
    machines: Tuple[MachineParams, ...]

    @property
    def h(self):
        return np.array([m.h for m in self.machines])

    @property
    def active(self):
        return [i for i, m in enumerate(self.machines) if m.active]


def build_replenish_lp(instance):
    model = LpModel(sense=MAX, name=f"replenish_balanced_n{instance.n}_M{instance.M}")
    for i, machine in enumerate(instance.machines):
        for u in range(machine.n_states):
            model.add_variable(f"x_{i}_{u}", cost=machine.rewards[u])
        for u in range(machine.n_states):
            if u != machine.initial:
                model.add_variable(f"z_{i}_{u}", cost=-machine.costs[u])
        model.add_variable(f"xk_{i}")
    model.add_free_variable("omega")

    row = {f"xk_{i}": 1.0 for i in range(instance.n)}
    row["omega"] = float(instance.M)
    model.add_constraint(row, LE, float(instance.M), name="L")
    for i, machine in enumerate(instance.machines):
        row = {f"x_{i}_{u}": 1.0 for u in range(machine.n_states)}
        row[f"xk_{i}"] = 1.0
        row["omega"] = -1.0
        model.add_constraint(row, LE, 1.0, name=f"H_{i}")
    for i, machine in enumerate(instance.machines):
        P = machine.p
        for u in range(machine.n_states):
            row = {}
            row[f"x_{i}_{u}"] = float(P[u].sum() - P[u, u])
            for v in range(machine.n_states):
                if v != u and P[v, u] > 0.0:
                    row[f"x_{i}_{v}"] = row.get(f"x_{i}_{v}", 0.0) - float(P[v, u])
            if u == machine.initial:
                row[f"xk_{i}"] = -machine.s
            else:
                row[f"z_{i}_{u}"] = 1.0
            model.add_constraint(row, EQ, 0.0, name=f"phi_{i}_{u}")
    return model


def _slackness_residuals(lam, machine, params):
    worst = 0.0
    P = machine.p
    phi = np.array(params.phi)
    for u in range(machine.n_states):
        if params.x[u] > TOL_Z:
            worst = max(worst, abs(params.h - machine.rewards[u] - float(P[u] @ (phi - phi[u]))))
        if params.z[u] > TOL_Z:
            worst = max(worst, abs(phi[u] + machine.costs[u]))
    if params.x_kappa > TOL_Z:
        worst = max(worst, abs(lam + params.h - machine.s * phi[machine.initial]))
    return worst


def solve_replenish(instance, tol_h=TOL_H):
    """Solves the balanced LP and returns both the primal support and the dual potentials."""
    model = build_replenish_lp(instance)
    solution = lp_solve(model)
    lam = solution.dual("L")
    machines = []
    for i, machine in enumerate(instance.machines):
        h = solution.dual(f"H_{i}")
        phi = tuple(solution.dual(f"phi_{i}_{u}") for u in range(machine.n_states))
        x = tuple(solution.value(f"x_{i}_{u}") for u in range(machine.n_states))
        z = tuple(0.0 if u == machine.initial else solution.value(f"z_{i}_{u}") for u in range(machine.n_states))
        params = MachineParams(h, phi, x, z, solution.value(f"xk_{i}"), h > tol_h)
        residual = _slackness_residuals(lam, machine, params)
        if residual > SLACKNESS_TOL * (1.0 + abs(h) + abs(lam)):
            logger.warning(f"machine {i}: complementary-slackness residual {residual:.2e}")
        machines.append(params)
    params = ReplenishParams(lam, solution.objective, solution.value("omega"), instance.M, tuple(machines))
    logger.info(f"Replenish LP: lambda = {lam:.10g}, objective = {solution.objective:.10g}, "
                f"h = {np.round(params.h, 10).tolist()}, active {params.active}")
    return params
