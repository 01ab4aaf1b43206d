"""Balanced LP for Feedback MAB with observation costs.

Arms are never revealed by a play; paying c_i at the end of a step reveals
arm i's state. The LP is solved in its balanced dual form

    min  M·λ + Σ h_i
    s.t. λ + φ_{i,s,t}                                  ≥ R_{i,s,t}
         t·h_i + (1 − u_{i,t})·p_i − Σ_{l≤t} φ_{i,g,l}  ≥ −c_i
         t·h_i − v_{i,t}·p_i − Σ_{l≤t} φ_{i,b,l}        ≥ −c_i
         M·λ − Σ h_i                                    = 0

and the play rates x and probe rates z are read from the row duals.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from src.core.beliefs import belief_u_array, belief_v_array
from src.core.errors import MissingSupport, NumericFailure, ParameterOutOfRange
from src.core.settings import section
from src.feedback.whittle_lp import default_tmax
from src.lp.model import EQ, GE, MIN, LpModel
from src.lp.simplex import lp_solve

# --- Configuration ---
_PROBE = section("probe")
TOL_Z = _PROBE["tol_z"]
MAX_RETRIES = _PROBE["max_retries"]
TOL_H = section("monotone")["tol_h"]
IDENTITY_TOL = 1e-6

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProbeArmParams:
    h: float
    p: float
    e: Optional[int]
    d: Optional[int]
    m: Optional[int]
    active: bool

    @property
    def wait(self):
        """Steps a bad-observed arm waits before it turns ready."""
        return self.d - self.m


@dataclass(frozen=True)
class ProbePolicyParams:
    """λ, per-arm (h, p, e, d, m) and the truncation the LP was solved at."""
    lam: float
    objective: float
    M: int
    T_max: int
    arms: Tuple[ProbeArmParams, ...]
    phi_g: np.ndarray
    phi_b: np.ndarray
    x_g: np.ndarray
    x_b: np.ndarray
    z_g: np.ndarray
    z_b: np.ndarray

    @property
    def active(self):
        return [i for i, a in enumerate(self.arms) if a.active]


def expected_rewards(arm, T_max):
    ts = np.arange(1, T_max + 1, dtype=float)
    return arm.r * belief_u_array(arm, ts), arm.r * belief_v_array(arm, ts)


def build_probe_lp(instance, T_max):
    """Balanced dual LP truncated to t ≤ T_max."""
    if T_max < 1:
        raise ParameterOutOfRange(f"T_max = {T_max} must be >= 1")
    ts = np.arange(1, T_max + 1, dtype=float)
    model = LpModel(sense=MIN, name=f"probe_balanced_n{instance.n}_T{T_max}")
    model.add_variable("lambda", cost=float(instance.M))
    for i in range(instance.n):
        model.add_variable(f"h_{i}", cost=1.0)
        model.add_variable(f"p_{i}")
    for i in range(instance.n):
        for s in ("g", "b"):
            for t in range(1, T_max + 1):
                model.add_variable(f"phi_{i}_{s}_{t}")

    for i, probe_arm in enumerate(instance.arms):
        arm, c = probe_arm.arm, probe_arm.cost
        R_g, R_b = expected_rewards(arm, T_max)
        u = belief_u_array(arm, ts)
        v = belief_v_array(arm, ts)
        for s, R in (("g", R_g), ("b", R_b)):
            for t in range(1, T_max + 1):
                model.add_constraint({"lambda": 1.0, f"phi_{i}_{s}_{t}": 1.0}, GE, float(R[t - 1]),
                                     name=f"play_{i}_{s}_{t}")
        for t in range(1, T_max + 1):
            g_row = {f"h_{i}": float(t), f"p_{i}": 1.0 - u[t - 1]}
            g_row.update({f"phi_{i}_g_{l}": -1.0 for l in range(1, t + 1)})
            model.add_constraint(g_row, GE, -c, name=f"probe_{i}_g_{t}")
            b_row = {f"h_{i}": float(t), f"p_{i}": -v[t - 1]}
            b_row.update({f"phi_{i}_b_{l}": -1.0 for l in range(1, t + 1)})
            model.add_constraint(b_row, GE, -c, name=f"probe_{i}_b_{t}")
    balance = {"lambda": float(instance.M)}
    balance.update({f"h_{i}": -1.0 for i in range(instance.n)})
    model.add_constraint(balance, EQ, 0.0, name="balance")
    return model


def _belief_at(arm, e, d):
    return float(belief_u_array(arm, [e])[0]), float(belief_v_array(arm, [d])[0])


def _first_support(z, tol_z):
    hits = np.flatnonzero(z > tol_z)
    return int(hits[0]) + 1 if hits.size else None


def extract_probe_params(instance, lp_solution, T_max, tol_z=TOL_Z, tol_h=TOL_H):
    """Reads (e, d, m) per active arm from the probe support and checks the tightness identities."""
    lam = lp_solution.value("lambda")
    n = instance.n
    shape = (n, T_max)
    phi_g, phi_b = np.zeros(shape), np.zeros(shape)
    x_g, x_b, z_g, z_b = (np.zeros(shape) for _ in range(4))
    arms = []
    for i, probe_arm in enumerate(instance.arms):
        arm, c = probe_arm.arm, probe_arm.cost
        R_g, R_b = expected_rewards(arm, T_max)
        phi_g[i] = np.maximum(0.0, R_g - lam)
        phi_b[i] = np.maximum(0.0, R_b - lam)
        for t in range(1, T_max + 1):
            x_g[i, t - 1] = lp_solution.dual(f"play_{i}_g_{t}")
            x_b[i, t - 1] = lp_solution.dual(f"play_{i}_b_{t}")
            z_g[i, t - 1] = lp_solution.dual(f"probe_{i}_g_{t}")
            z_b[i, t - 1] = lp_solution.dual(f"probe_{i}_b_{t}")
        h = lp_solution.value(f"h_{i}")
        p = lp_solution.value(f"p_{i}")
        if h <= tol_h:
            arms.append(ProbeArmParams(h, p, None, None, None, False))
            continue
        e = _first_support(z_g[i], tol_z)
        d = _first_support(z_b[i], tol_z)
        if e is None or d is None:
            raise MissingSupport(f"arm {i}: h = {h:.3e} but no positive probe rate on "
                                 f"{'g' if e is None else 'b'} within T_max = {T_max}")
        m = int(np.count_nonzero(phi_b[i, :d] > tol_z))
        u_e, v_d = _belief_at(arm, e, d)
        stage1 = d * h + c - v_d * p - phi_b[i, :d].sum()
        stage2 = e * (lam + h) - R_g[:e].sum() + c + (1.0 - u_e) * p
        scale = 1.0 + abs(c) + abs(p) + d * h + e * (lam + h)
        if abs(stage1) > IDENTITY_TOL * scale or abs(stage2) > IDENTITY_TOL * scale:
            raise NumericFailure(f"arm {i}: probe identities off by {stage1:.2e} (d = {d}) and "
                                 f"{stage2:.2e} (e = {e})")
        arms.append(ProbeArmParams(h, p, e, d, m, True))
    return ProbePolicyParams(lam, lp_solution.objective, instance.M, T_max, tuple(arms),
                             phi_g, phi_b, x_g, x_b, z_g, z_b)


def solve_probe(instance, T_max=None, max_retries=MAX_RETRIES):
    """Solves the probe LP, doubling T_max while an active arm's support touches the truncation."""
    T_max = T_max or default_tmax([a.arm for a in instance.arms])
    for attempt in range(max_retries + 1):
        solution = lp_solve(build_probe_lp(instance, T_max))
        try:
            params = extract_probe_params(instance, solution, T_max)
        except MissingSupport:
            if attempt == max_retries:
                raise
            params = None
        boundary = params is None or any(
            a.active and max(a.d, a.e) >= T_max for a in params.arms)
        if not boundary:
            logger.info(f"Probe LP (T_max = {T_max}): lambda = {params.lam:.10g}, "
                        f"objective = {params.objective:.10g}, active arms {params.active}")
            return params
        if attempt == max_retries:
            logger.warning(f"Probe support still at the truncation T_max = {T_max} after {max_retries} retries")
            return params
        T_max *= 2
        logger.warning(f"Probe support reached the truncation, retrying with T_max = {T_max}")
    return params


def probe_drift_certificate(instance, params):
    """Per active arm, value plus expected potential change of a Stage 1 and a Stage 2 block
    minus the target (block length)·(λ + h)."""
    records = []
    lam = params.lam
    for i, (probe_arm, a) in enumerate(zip(instance.arms, params.arms)):
        if not a.active:
            continue
        arm, c = probe_arm.arm, probe_arm.cost
        R_g, R_b = expected_rewards(arm, max(params.T_max, a.d, a.e))
        u_e, v_d = _belief_at(arm, a.e, a.d)
        stage1 = -c + R_b[a.d - a.m:a.d].sum() + v_d * a.p - a.wait * a.h
        stage2 = R_g[:a.e].sum() - c - (1.0 - u_e) * a.p
        records.append({"arm": i, "stage": 1, "length": a.m, "value": stage1,
                        "target": a.m * (lam + a.h), "margin": stage1 - a.m * (lam + a.h)})
        records.append({"arm": i, "stage": 2, "length": a.e, "value": stage2,
                        "target": a.e * (lam + a.h), "margin": stage2 - a.e * (lam + a.h)})
    frame = pd.DataFrame.from_records(records, columns=["arm", "stage", "length", "value", "target", "margin"])
    worst = float(frame["margin"].min()) if len(frame) else math.inf
    logger.debug(f"Probe drift certificate: worst block margin {worst:.3e}")
    return frame
