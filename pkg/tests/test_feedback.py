import math

import numpy as np
import pytest

from src.core.beliefs import belief_v_array
from src.core.errors import AllArmsInactive, ParameterOutOfRange, ShapeMismatch
from src.core.types import BAD, GOOD, BeliefState, FeedbackArm
from src.feedback.balanced import (
    ArmIndexParams, BalancedIndexPolicy, FeedbackPolicyParams, balance_identity_residuals,
    balanced_index_next, balanced_lambda, excess_rewards, total_excess,
)
from src.feedback.baselines import (
    AlwaysPlayPolicy, MyopicPolicy, RegionPolicy, RoundRobinPolicy, ThresholdPolicy,
)
from src.feedback.single_arm import (
    SingleArmPolicyP, lagrange_value_F, never_play_threshold, policy_chain, policy_playrate_Q,
    policy_reward_R, single_arm_optimum,
)
from src.feedback.whittle_lp import (
    build_whittle_lp, combine_split, default_tmax, lagrangean_upper_bound, whittle_lp_upper_bound,
)
from src.lp.model import EQ
from src.lp.simplex import lp_solve
from src.gallery.random_instances import random_feedback_arm


def fast_arms(rng, n, min_rate=0.15, max_total=0.9):
    return tuple(random_feedback_arm(rng, min_rate=min_rate, max_total=max_total) for _ in range(n))


def _stationary(P):
    n = P.shape[0]
    A = np.vstack([P.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    return np.linalg.lstsq(A, b, rcond=None)[0]


def _params(ts, active=None):
    active = active or [True] * len(ts)
    arms = tuple(ArmIndexParams(h=0.1, t=t, p=1.0, active=a) for t, a in zip(ts, active))
    return FeedbackPolicyParams(0.5, 0.5, 0.5005, 1e-3, arms)


# Test R(t) and Q(t) against the stationary law of the P(t) chain
def test_closed_forms_match_chain(rng):
    for arm in fast_arms(rng, 20, min_rate=0.02):
        for t in (1, 2, 3, 7, 15, 40):
            P, reward, plays = policy_chain(arm, t)
            pi = _stationary(P)
            assert policy_reward_R(arm, t) == pytest.approx(pi @ reward, abs=1e-9)
            assert policy_playrate_Q(arm, t) == pytest.approx(pi @ plays, abs=1e-9)
            assert policy_playrate_Q(arm, t) >= 1.0 / t - 1e-12


def test_policy_chain_is_stochastic():
    P, _, plays = policy_chain(FeedbackArm(0.1, 0.3, 1.0), 5)
    assert P.shape == (6, 6)
    assert np.allclose(P.sum(axis=1), 1.0)
    assert plays.sum() == 2.0


def test_closed_forms_reject_infinite_t():
    arm = FeedbackArm(0.1, 0.1, 1.0)
    with pytest.raises(ParameterOutOfRange):
        policy_reward_R(arm, math.inf)
    with pytest.raises(ParameterOutOfRange):
        SingleArmPolicyP(0)
    assert SingleArmPolicyP(math.inf).never_plays


# Test the single-arm optimum against a brute-force scan over t
def test_single_arm_optimum_brute_force(rng):
    ts = np.arange(1, 3001)
    for arm in fast_arms(rng, 15, min_rate=0.05):
        for frac in (0.0, 0.2, 0.5, 0.8):
            lam = frac * never_play_threshold(arm)
            values = np.array([lagrange_value_F(arm, lam, t) for t in ts])
            h, t = single_arm_optimum(arm, lam)
            assert h == pytest.approx(max(0.0, values.max()), abs=1e-12)
            assert lagrange_value_F(arm, lam, t) == pytest.approx(values.max(), abs=1e-12)


# Test a slow-mixing arm against a vectorised scan up to 1e5
def test_single_arm_optimum_slow_arm():
    arm = FeedbackArm(0.01, 0.01, 1.0)
    lam = 0.3
    ts = np.arange(1, 100_001, dtype=float)
    v = belief_v_array(arm, ts)
    values = ((arm.r - lam) * v - lam * arm.beta) / (v + ts * arm.beta)
    h, t = single_arm_optimum(arm, lam)
    assert h == pytest.approx(values.max(), rel=1e-9)
    assert lagrange_value_F(arm, lam, t) == pytest.approx(values.max(), rel=1e-9)


# Test the balanced penalty of a lone arm is a fixed point of its excess reward
def test_single_arm_balance_fixed_point(gap_arm):
    params = balanced_lambda([gap_arm])
    h, _ = single_arm_optimum(gap_arm, params.lambda_star)
    assert abs(params.lambda_star - h) <= 1e-9


def test_single_arm_never_plays_above_threshold():
    arm = FeedbackArm(0.2, 0.1, 1.0)
    assert single_arm_optimum(arm, never_play_threshold(arm)) == (0.0, math.inf)
    assert single_arm_optimum(arm, 10.0) == (0.0, math.inf)
    with pytest.raises(ParameterOutOfRange):
        single_arm_optimum(arm, -0.1)


def test_single_arm_monotone_in_lambda():
    arm = FeedbackArm(0.03, 0.05, 1.5)
    grid = np.linspace(0.0, never_play_threshold(arm) * 0.999, 60)
    results = [single_arm_optimum(arm, lam) for lam in grid]
    hs = [h for h, _ in results]
    ts = [t for _, t in results]
    assert all(a >= b - 1e-12 for a, b in zip(hs, hs[1:]))
    assert all(a <= b for a, b in zip(ts, ts[1:]))


# Test the balanced penalty
def test_balanced_lambda_bracket(two_arms):
    params = balanced_lambda(two_arms)
    assert params.lambda_star < total_excess(two_arms, params.lambda_star)
    assert total_excess(two_arms, params.lambda_upper) <= params.lambda_upper
    assert params.lambda_lower <= params.lambda_star <= params.lambda_upper
    assert params.lambda_upper == pytest.approx(params.lambda_lower * (1 + params.epsilon))
    assert balance_identity_residuals(two_arms, params) <= 1e-9


def test_balanced_lambda_against_lp(rng):
    for _ in range(8):
        arms = fast_arms(rng, int(rng.integers(2, 6)), min_rate=0.02)
        params = balanced_lambda(arms)
        opt = whittle_lp_upper_bound(arms, method="lp")
        assert params.lambda_star >= (1 - params.epsilon) * opt / 2 - 1e-9
        assert total_excess(arms, params.lambda_star) >= opt / 2 - 1e-9


def test_balanced_lambda_inactive_arms():
    arms = (FeedbackArm(0.3, 0.3, 5.0), FeedbackArm(0.01, 0.5, 0.01))
    params = balanced_lambda(arms)
    assert params.arms[0].active
    assert not params.arms[1].active
    assert params.arms[1].t == math.inf


def test_balanced_lambda_rejects():
    with pytest.raises(AllArmsInactive):
        balanced_lambda([FeedbackArm(0.1, 0.1, 0.0)])
    with pytest.raises(ParameterOutOfRange):
        balanced_lambda([FeedbackArm(0.1, 0.1, 1.0)], epsilon=1.5)
    with pytest.raises(ParameterOutOfRange):
        balanced_lambda([])


def test_excess_rewards_parallel(two_arms):
    assert excess_rewards(two_arms, 0.3, n_jobs=2) == excess_rewards(two_arms, 0.3)


# Test the balanced index policy decisions
def test_balanced_index_next_exploits_good():
    params = _params([3, 2])
    beliefs = [BeliefState(BAD, 9), BeliefState(GOOD, 1)]
    assert balanced_index_next(params, beliefs) == 1


def test_balanced_index_next_exploits_only_fresh_good():
    params = _params([3, 2])
    assert balanced_index_next(params, [BeliefState(BAD, 2), BeliefState(GOOD, 2)]) is None
    assert balanced_index_next(params, [BeliefState(BAD, 3), BeliefState(GOOD, 2)]) == 0


def test_balanced_index_next_largest_overshoot_then_lowest_id():
    params = _params([3, 2, 4])
    assert balanced_index_next(params, [BeliefState(BAD, 4), BeliefState(BAD, 4), BeliefState(BAD, 1)]) == 1
    assert balanced_index_next(params, [BeliefState(BAD, 4), BeliefState(BAD, 3), BeliefState(BAD, 5)]) == 0


def test_balanced_index_next_idles():
    params = _params([3, 2], active=[True, False])
    assert balanced_index_next(params, [BeliefState(BAD, 2), BeliefState(GOOD, 1)]) is None
    with pytest.raises(ParameterOutOfRange):
        balanced_index_next(params, [BeliefState(BAD, 2)])


def test_balanced_policy_required_ages():
    policy = BalancedIndexPolicy(_params([3, math.inf], active=[True, False]))
    assert policy.required_ages() == [3, 1]


# Test the Whittle LP and its Lagrangean
def test_whittle_lp_matches_lagrangean(two_arms):
    T = default_tmax(two_arms)
    lp_value = lp_solve(build_whittle_lp(two_arms, T)).objective
    lagrangean, lam = lagrangean_upper_bound(two_arms)
    assert lagrangean >= lp_value - 1e-9
    assert lagrangean == pytest.approx(lp_value, rel=1e-6)
    assert 0.0 <= lam


def test_whittle_lp_single_play_bound(two_arms):
    value = whittle_lp_upper_bound(two_arms)
    assert value <= max(a.r for a in two_arms)
    assert whittle_lp_upper_bound(two_arms, M=2) >= value
    with pytest.raises(ParameterOutOfRange):
        whittle_lp_upper_bound(two_arms, method="simplex")
    with pytest.raises(ParameterOutOfRange):
        build_whittle_lp(two_arms, 0)


# Test the absorbing truncation state
def test_whittle_lp_absorbing_truncation(two_arms):
    T = 4
    model = build_whittle_lp(two_arms, T)
    A = model.dense()
    time_row = A[model.row("time_0")]
    assert model.relations[model.row("time_0")] == EQ
    assert time_row[model.var("w_0_b")] == 1.0
    assert time_row[model.var(f"x_0_b_{T}")] == T
    frozen = belief_v_array(two_arms[0], np.array([float(T)]))[0]
    assert A[model.row("flow_0"), model.var(f"x_0_b_{T}")] == pytest.approx(-frozen)

    values = [lp_solve(build_whittle_lp(two_arms, t)).objective for t in (2, 4, default_tmax(two_arms))]
    assert values[0] <= values[1] + 1e-9
    assert values[1] <= values[2] + 1e-9


def test_combine_split_meets_budget(rng):
    arms = fast_arms(rng, 3)
    split = combine_split(arms)
    assert split.lambda_minus <= split.lambda_plus
    assert 0.0 <= split.weight <= 1.0
    assert split.mixed_rate == pytest.approx(1.0, abs=1e-9)
    assert split.mixed_reward == pytest.approx(whittle_lp_upper_bound(arms, method="lp"), rel=1e-6)


def test_combine_split_under_budget(two_arms):
    split = combine_split(two_arms, M=2)
    assert split.weight == 1.0
    assert split.mixed_rate <= 2.0


# Test baseline policies
def test_myopic_prefers_expected_reward(two_arms):
    policy = MyopicPolicy(two_arms)
    assert policy.next_action([BeliefState(GOOD, 1), BeliefState(BAD, 1)]) == 0
    assert policy.next_action([BeliefState(BAD, 1), BeliefState(BAD, 20)]) == 1


def test_always_play_and_round_robin():
    assert AlwaysPlayPolicy(3, 2).next_action([BeliefState(BAD, 1)] * 3) == 2
    with pytest.raises(ShapeMismatch):
        AlwaysPlayPolicy(2, 2)
    policy = RoundRobinPolicy(3, [1, 2])
    assert policy.next_action([BeliefState(GOOD, 1), BeliefState(BAD, 2), BeliefState(BAD, 5)]) == 2
    assert policy.next_action([BeliefState(BAD, 1), BeliefState(GOOD, 2), BeliefState(BAD, 5)]) == 1


def test_region_policy():
    policy = RegionPolicy.optimal_region()
    beliefs = [BeliefState(GOOD, 1), BeliefState(BAD, 2), BeliefState(BAD, 3)]
    assert policy.next_action(beliefs) == 0
    assert policy.next_action([BeliefState(GOOD, 1), BeliefState(BAD, 5), BeliefState(BAD, 3)]) == 1
    assert policy.next_action([BeliefState(GOOD, 1), BeliefState(BAD, 2), BeliefState(GOOD, 1)]) == 2
    assert RegionPolicy.square(3).name == "square<=3"
    with pytest.raises(ShapeMismatch):
        policy.next_action(beliefs[:2])


def test_threshold_policy():
    policy = ThresholdPolicy([2, 5])
    assert policy.next_action([BeliefState(BAD, 1), BeliefState(BAD, 4)]) is None
    assert policy.next_action([BeliefState(BAD, 3), BeliefState(BAD, 5)]) == 0
    assert policy.required_ages() == [2, 5]
    with pytest.raises(ParameterOutOfRange):
        ThresholdPolicy([0])
