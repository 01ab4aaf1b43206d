"""Sub-command implementations behind ``src.cli.main``."""
import logging
import math
import re
from pathlib import Path

from src.cli.gap_reports import run_gap
from src.cli.instance_io import emit_instance, load_instance
from src.core.errors import ShapeMismatch, UnsupportedShape
from src.core.types import BeliefState, FeedbackInstance, MonotoneInstance, ProbeInstance, ReplenishInstance
from src.feedback.balanced import BalancedIndexPolicy, balanced_lambda
from src.feedback.baselines import AlwaysPlayPolicy, MyopicPolicy, RoundRobinPolicy
from src.gallery.instances import GalleryId, generate
from src.monotone.extract import solve_balance
from src.monotone.policy import MonotoneBalancedPolicy
from src.probe.policy import ProbePolicy
from src.probe.probe_lp import solve_probe
from src.replenish.policy import ReplenishPolicy, WhittleReplenishPolicy, whittle_indices
from src.replenish.replenish_lp import solve_replenish
from src.simulate.exact_eval import T_CAP, exact_policy_eval
from src.simulate.policy_simulator import simulate
from src.simulate.value_iteration import vi_optimal
from src.whittle.index import WhittleIndexTable
from src.whittle.policies import ThresholdWhittlePolicy, WhittleIndexPolicy

# --- Configuration ---
FEEDBACK_POLICIES = ("balanced", "threshold-whittle", "plain-whittle", "myopic", "always-play(i)",
                     "round-robin", "optimal-vi")
_ARG_POLICY = re.compile(r"^(always-play|round-robin)\((.*)\)$")

logger = logging.getLogger(__name__)


def resolve_instance(source):
    """Loads an instance file, or generates a gallery instance when ``source`` names one."""
    if Path(source).exists():
        return load_instance(source)
    instance = generate(GalleryId.parse(source))
    if isinstance(instance, dict):
        raise UnsupportedShape(f"{source} is a documented instance only; no solver accepts it")
    return instance


def _feedback_policy(instance, name, eps):
    arms = instance.arms
    match = _ARG_POLICY.match(name)
    if match:
        args = [int(a) for a in match.group(2).split(",") if a.strip()]
        if match.group(1) == "always-play":
            return AlwaysPlayPolicy(instance.n, args[0])
        return RoundRobinPolicy(instance.n, args)
    if name == "balanced":
        return BalancedIndexPolicy(balanced_lambda(arms, eps))
    if name == "threshold-whittle":
        return ThresholdWhittlePolicy(arms, balanced_lambda(arms, eps).lambda_star)
    if name == "plain-whittle":
        return WhittleIndexPolicy(arms)
    if name == "myopic":
        return MyopicPolicy(arms)
    if name == "round-robin":
        return RoundRobinPolicy(instance.n, range(instance.n))
    if name == "optimal-vi":
        return vi_optimal(arms).policy
    raise ShapeMismatch(f"unknown feedback policy {name!r}; choose from {FEEDBACK_POLICIES}")


def build_policy(instance, name, eps, tmax=None):
    if isinstance(instance, FeedbackInstance):
        return _feedback_policy(instance, name, eps)
    if isinstance(instance, MonotoneInstance) and name == "balanced":
        variant = instance.default_variant()
        return MonotoneBalancedPolicy(instance, solve_balance(instance, variant), variant)
    if isinstance(instance, ProbeInstance) and name == "balanced":
        return ProbePolicy(solve_probe(instance, T_max=tmax))
    if isinstance(instance, ReplenishInstance):
        if name == "balanced":
            return ReplenishPolicy(solve_replenish(instance))
        if name == "plain-whittle":
            return WhittleReplenishPolicy(instance)
    raise ShapeMismatch(f"policy {name!r} is not available for {type(instance).__name__}")


def _finite(x):
    return None if x == math.inf else x


def cmd_index(instance, eps, tmax=None, whittle_ages=5):
    """Balanced penalty and per-arm index parameters of an instance."""
    if isinstance(instance, FeedbackInstance):
        params = balanced_lambda(instance.arms, eps)
        table = WhittleIndexTable(instance.arms)
        arms = []
        for i, a in enumerate(params.arms):
            arms.append({
                "arm": i, "h": a.h, "t": _finite(a.t), "p": a.p, "active": a.active,
                "whittle_g1": table.index_g1[i],
                "whittle_b": [table.index(i, BeliefState("b", t)) for t in range(1, whittle_ages + 1)],
            })
        return {"type": "feedback", "lambda": params.lambda_star, "lambda_lower": params.lambda_lower,
                "lambda_upper": params.lambda_upper, "epsilon": eps, "arms": arms}
    if isinstance(instance, MonotoneInstance):
        variant = instance.default_variant()
        solution = solve_balance(instance, variant)
        arms = [{"arm": i, "h": a.h, "active": a.active, "continuous": a.continuous,
                 "t": [_finite(t) for t in a.t_tight],
                 "class": ["G" if g else "I" for g in a.good]} for i, a in enumerate(solution.arms)]
        return {"type": "monotone", "variant": variant, "lambda": solution.lam,
                "objective": solution.objective, "residual": solution.residual, "arms": arms}
    if isinstance(instance, ProbeInstance):
        params = solve_probe(instance, T_max=tmax)
        arms = [{"arm": i, "h": a.h, "p": a.p, "e": a.e, "d": a.d, "m": a.m, "active": a.active}
                for i, a in enumerate(params.arms)]
        return {"type": "probe", "lambda": params.lam, "objective": params.objective,
                "T_max": params.T_max, "arms": arms}
    params = solve_replenish(instance)
    try:
        etas = whittle_indices(instance)
    except UnsupportedShape:
        etas = [None] * instance.n
    machines = [{"machine": i, "h": m.h, "active": m.active, "phi": list(m.phi),
                 "triggers": sorted(m.triggers), "whittle": etas[i]} for i, m in enumerate(params.machines)]
    return {"type": "replenish", "lambda": params.lam, "objective": params.objective, "machines": machines}


def cmd_simulate(instance, policy_name, config, eps, exact=False, tmax=None):
    """Monte Carlo SimResult, or the exact chain value when ``exact`` is set."""
    policy = build_policy(instance, policy_name, eps, tmax)
    if exact:
        result = exact_policy_eval(instance, policy, T_cap=tmax or T_CAP)
        return {"policy": getattr(policy, "name", policy_name), "value": result.value,
                "n_states": result.n_states, "residual": result.residual,
                "play_rates": list(result.play_rates)}
    return simulate(instance, policy, config)


def cmd_gap(gallery_id, config):
    return run_gap(gallery_id, config)


def cmd_emit(gallery_id, out=None):
    return emit_instance(generate(GalleryId.parse(gallery_id)), out)
