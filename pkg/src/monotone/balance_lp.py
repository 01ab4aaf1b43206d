"""Balance LP and Whittle dual LP for monotone bandits and their variants.

Constraint families, one row per (arm i, state k, t in the breakpoints of f_k):

  base       λ + t·h_i − f_k(t)·ΔP_k                    ≥ r_k
  multiplay  L_k(λ + h_i) + (t − 1)·h_i − f_k(t)·ΔP_k    ≥ r_k
  switching  λ + t·h_i − f_k(t)·ΔP_k                    ≥ r_k − c_i − s_i
             t(λ + h_i) − f_k(t)·ΔP_k                   ≥ r_k

with ΔP_k = Σ_j q(k, j)(p_j − p_k). The Balance LP adds λ = Σ h_i
(M·λ = Σ h_i for multiplay); the Whittle dual omits that row and has the
same value as the Whittle LP.
"""
import logging

from src.core.errors import VariantMismatch
from src.lp.model import EQ, GE, MIN, LpModel
from src.monotone.encodings import constraint_times

BASE, MULTIPLAY, SWITCHING = "base", "multiplay", "switching"
VARIANTS = (BASE, MULTIPLAY, SWITCHING)

logger = logging.getLogger(__name__)


def check_variant(instance, variant):
    if variant not in VARIANTS:
        raise VariantMismatch(f"variant {variant!r} must be one of {VARIANTS}")
    if variant == BASE and (instance.M != 1 or instance.max_duration > 1 or instance.has_switching):
        raise VariantMismatch("base variant needs M = 1, unit durations and no switching costs")
    if variant == MULTIPLAY and instance.has_switching:
        raise VariantMismatch("multiplay variant does not model switching costs")
    if variant == SWITCHING and (instance.M != 1 or instance.max_duration > 1):
        raise VariantMismatch("switching variant needs M = 1 and unit durations")


def lambda_weight(instance, variant):
    return float(instance.M) if variant == MULTIPLAY else 1.0


def _potential_terms(arm, i, k, f_t):
    """Coefficients of the p variables in −f(t)·ΔP_k."""
    coeffs = {}
    row_sum = 0.0
    for j in range(arm.n_states):
        qkj = arm.q[k, j]
        if qkj > 0.0:
            coeffs[f"p_{i}_{j}"] = -f_t * qkj
            row_sum += qkj
    if row_sum > 0.0:
        coeffs[f"p_{i}_{k}"] = coeffs.get(f"p_{i}_{k}", 0.0) + f_t * row_sum
    return coeffs


def _merge(*parts):
    merged = {}
    for part in parts:
        for key, value in part.items():
            merged[key] = merged.get(key, 0.0) + value
    return merged


def _build(instance, variant, balanced):
    check_variant(instance, variant)
    weight = lambda_weight(instance, variant)
    kind = "balance" if balanced else "whittle_dual"
    model = LpModel(sense=MIN, name=f"monotone_{kind}_{variant}_n{instance.n}")
    model.add_variable("lambda", cost=weight)
    for i in range(instance.n):
        model.add_variable(f"h_{i}", cost=1.0)
    for i, arm in enumerate(instance.arms):
        for k in range(arm.n_states):
            if k == arm.initial_state:
                model.add_variable(f"p_{i}_{k}", lower=0.0, upper=0.0)
            else:
                model.add_free_variable(f"p_{i}_{k}")

    for i, arm in enumerate(instance.arms):
        h = f"h_{i}"
        for k, state in enumerate(arm.states):
            for t in constraint_times(arm, k):
                f_t = state.escape(t)
                pot = _potential_terms(arm, i, k, f_t)
                if variant == BASE:
                    model.add_constraint(_merge({"lambda": 1.0, h: float(t)}, pot), GE, state.reward,
                                         name=f"play_{i}_{k}_{t}")
                elif variant == MULTIPLAY:
                    L = state.duration
                    model.add_constraint(_merge({"lambda": float(L), h: float(L + t - 1)}, pot), GE,
                                         state.reward, name=f"play_{i}_{k}_{t}")
                else:
                    cost = instance.switch_out[i] + instance.switch_in[i]
                    model.add_constraint(_merge({"lambda": 1.0, h: float(t)}, pot), GE, state.reward - cost,
                                         name=f"play_{i}_{k}_{t}")
                    model.add_constraint(_merge({"lambda": float(t), h: float(t)}, pot), GE, state.reward,
                                         name=f"stick_{i}_{k}_{t}")
    if balanced:
        model.add_constraint(_merge({"lambda": weight}, {f"h_{i}": -1.0 for i in range(instance.n)}), EQ, 0.0,
                             name="balance")
    logger.debug(f"Built {model.name}: {model.n_variables} variables, {model.n_constraints} rows")
    return model


def build_balance_lp(instance, variant=None):
    """Balance LP: objective λ + Σ h_i (M·λ + Σ h_i for multiplay) with the balance row."""
    return _build(instance, variant or instance.default_variant(), balanced=True)


def build_whittle_lp(instance, variant=None):
    """Dual of the truncated Whittle LP; its optimum equals the Whittle LP value."""
    return _build(instance, variant or instance.default_variant(), balanced=False)
