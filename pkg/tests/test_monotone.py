import math

import numpy as np
import pytest

from src.core.errors import VariantMismatch
from src.core.types import FeedbackArm, MonotoneArm, MonotoneInstance, MonotoneState, PiecewiseLinearMonotone
from src.feedback.balanced import balanced_lambda
from src.feedback.whittle_lp import build_whittle_lp as build_feedback_lp
from src.feedback.whittle_lp import default_tmax
from src.lp.simplex import lp_solve
from src.monotone.balance_lp import (
    BASE, MULTIPLAY, SWITCHING, build_balance_lp, build_whittle_lp, check_variant, lambda_weight,
)
from src.monotone.encodings import (
    BAD_STATE, GOOD_STATE, constraint_times, feedback_as_monotone, stochastic_mab_as_monotone,
)
from src.monotone.extract import ArmBalance, BalanceSolution, always_play_average, solve_balance
from src.monotone.policy import (
    MonotoneBalancedPolicy, MonotonePolicyState, enumerate_step, monotone_index_next, sample_step,
    step_reward, transition_outcomes, waiting_caps,
)
from src.simulate.exact_eval import exact_monotone_eval


def _balance(t_tight, good, active=True, continuous=False, h=0.2):
    k = len(t_tight)
    return ArmBalance(h, (0.0,) * k, (0.0,) * k, tuple(t_tight), tuple(good), active, continuous, continuous)


def _solution(arms, variant=BASE):
    return BalanceSolution(variant, 0.5, 1.0, tuple(arms))


@pytest.fixture
def mab():
    """Two Markov chains that move only when played."""
    return stochastic_mab_as_monotone(
        rewards=[(1.0, 0.2), (0.8, 0.1)],
        q_matrices=[[[0.0, 0.3], [0.4, 0.0]], [[0.0, 0.5], [0.5, 0.0]]],
    )


@pytest.fixture
def three_state_arm():
    states = (
        MonotoneState(2.0, 1, PiecewiseLinearMonotone(((1, 0.2), (4, 0.8)))),
        MonotoneState(1.0, 1, PiecewiseLinearMonotone.constant(0.5)),
        MonotoneState(0.0, 1, PiecewiseLinearMonotone(((1, 0.1), (3, 0.9)))),
    )
    q = [[0.0, 0.6, 0.4], [0.3, 0.0, 0.7], [1.0, 0.0, 0.0]]
    return MonotoneArm(states, q)


# Test the feedback encoding reproduces the feedback balanced penalty and thresholds
def test_feedback_encoding_matches_balanced_lambda(two_arms):
    T = default_tmax(two_arms)
    solution = solve_balance(feedback_as_monotone(two_arms, T), BASE)
    params = balanced_lambda(two_arms)
    assert solution.lam == pytest.approx(params.lambda_star, abs=1e-4)
    assert solution.residual <= 1e-8
    for mono, fb in zip(solution.arms, params.arms):
        assert mono.active == fb.active
        if fb.active:
            assert mono.good[GOOD_STATE] and not mono.good[BAD_STATE]
            assert mono.t_tight[GOOD_STATE] == 1
            assert mono.t_tight[BAD_STATE] == fb.t
            assert mono.h == pytest.approx(fb.h, abs=1e-4)


def test_monotone_whittle_dual_matches_feedback_lp(two_arms):
    T = default_tmax(two_arms)
    dual = lp_solve(build_whittle_lp(feedback_as_monotone(two_arms, T), BASE)).objective
    primal = lp_solve(build_feedback_lp(two_arms, T)).objective
    assert dual == pytest.approx(primal, rel=1e-6)


def test_encoding_starts_bad(gap_arm):
    arm = feedback_as_monotone([gap_arm], 20).arms[0]
    assert arm.initial_state == BAD_STATE
    assert arm.states[GOOD_STATE].reward == gap_arm.r
    assert arm.states[BAD_STATE].escape(1) == pytest.approx(gap_arm.alpha)
    assert constraint_times(arm, BAD_STATE) == list(range(1, 21))


# Test variant checks
def test_check_variant(mab):
    check_variant(mab, BASE)
    with pytest.raises(VariantMismatch):
        check_variant(mab, "greedy")
    multi = MonotoneInstance(mab.arms, M=2)
    with pytest.raises(VariantMismatch):
        check_variant(multi, BASE)
    switching = MonotoneInstance(mab.arms, switch_out=(0.1, 0.1), switch_in=(0.1, 0.1))
    with pytest.raises(VariantMismatch):
        check_variant(switching, MULTIPLAY)
    assert lambda_weight(multi, MULTIPLAY) == 2.0
    assert lambda_weight(switching, SWITCHING) == 1.0


def test_balance_lp_rows(mab):
    model = build_balance_lp(mab)
    assert model.row_names[-1] == "balance"
    assert "play_0_1_1" in model.row_names
    switching = MonotoneInstance(mab.arms, switch_out=(0.1, 0.1), switch_in=(0.1, 0.1))
    rows = build_balance_lp(switching).row_names
    assert "stick_1_0_1" in rows
    assert "balance" not in build_whittle_lp(mab).row_names


# Test the Balance LP on a stochastic MAB
def test_solve_balance_stochastic_mab(mab):
    solution = solve_balance(mab)
    assert solution.variant == BASE
    assert solution.balance_gap() <= 1e-7
    assert solution.objective == pytest.approx(2 * solution.lam, rel=1e-7)
    whittle = lp_solve(build_whittle_lp(mab)).objective
    assert whittle <= solution.objective + 1e-7
    assert solution.residual <= 1e-8


def test_always_play_average(mab):
    # stationary law of [[0.7, 0.3], [0.4, 0.6]] is (4/7, 3/7)
    assert always_play_average(mab.arms[0]) == pytest.approx((4 / 7) * 1.0 + (3 / 7) * 0.2)


# Test the one-step dynamics
def test_transition_outcomes(three_state_arm):
    outcomes = transition_outcomes(three_state_arm, 0, 2)
    assert sum(p for p, _ in outcomes) == pytest.approx(1.0)
    f = 0.2 + (0.8 - 0.2) / 3
    assert dict((j, p) for p, j in outcomes)[1] == pytest.approx(f * 0.6)
    assert dict((j, p) for p, j in outcomes)[0] == pytest.approx(1 - f)


def test_enumerate_step_probabilities(three_state_arm, mab):
    instance = MonotoneInstance((three_state_arm, mab.arms[0]))
    state = MonotonePolicyState((0, 1), (3, 2))
    successors = enumerate_step(instance, state, (0,))
    assert sum(p for p, _ in successors) == pytest.approx(1.0)
    for _, nxt in successors:
        assert nxt.y == (1, 3)
    nxt = sample_step(instance, state, (0,), np.array([0.999999, 0.5]))
    assert nxt.states == (0, 1)


def test_duration_lock():
    states = (MonotoneState(1.0, 3, PiecewiseLinearMonotone.constant(1.0)),
              MonotoneState(0.0, 1, PiecewiseLinearMonotone.constant(1.0)))
    arm = MonotoneArm(states, [[0.0, 1.0], [1.0, 0.0]])
    instance = MonotoneInstance((arm, arm), M=2)
    state = MonotonePolicyState.initial(instance)
    [(prob, nxt)] = enumerate_step(instance, state, (0,))
    assert prob == 1.0
    assert nxt.lock_map == {0: (2, 1)}
    assert step_reward(instance, state, (0,)) == 1.0


def test_step_reward_switching(mab):
    instance = MonotoneInstance(mab.arms, switch_out=(0.3, 0.3), switch_in=(0.2, 0.2))
    fresh = MonotonePolicyState((0, 0), (1, 1))
    assert step_reward(instance, fresh, (1,)) == pytest.approx(0.8 - 0.2)
    assert step_reward(instance, MonotonePolicyState((0, 0), (1, 1), (), 0), (1,)) == pytest.approx(0.8 - 0.5)
    assert step_reward(instance, MonotonePolicyState((0, 0), (1, 1), (), 1), (1,)) == pytest.approx(0.8)
    [(_, nxt)] = [s for s in enumerate_step(instance, fresh, (1,)) if s[1].states[1] == 1]
    assert nxt.current == 1


# Test the index decisions
def test_base_next_exploits_then_ready_order():
    params = _solution([_balance((1, 3), (True, False)), _balance((2, 2), (False, False))])
    assert monotone_index_next(params, MonotonePolicyState((0, 0), (1, 1)), BASE) == (0,)
    assert monotone_index_next(params, MonotonePolicyState((1, 0), (4, 3)), BASE) == (0,)
    assert monotone_index_next(params, MonotonePolicyState((1, 0), (3, 3)), BASE) == (1,)
    assert monotone_index_next(params, MonotonePolicyState((1, 0), (2, 1)), BASE) == ()


def test_base_next_continuous_arm_first():
    params = _solution([_balance((1, 3), (True, False)), _balance((1,), (False,), continuous=True)])
    assert monotone_index_next(params, MonotonePolicyState((0, 0), (1, 1)), BASE) == (1,)


def test_multiplay_next_fills_free_slots():
    arms = [_balance((1,), (False,)), _balance((2,), (False,)), _balance((2,), (False,))]
    params = _solution(arms, MULTIPLAY)
    state = MonotonePolicyState((0, 0, 0), (1, 3, 5), ((0, 2, 1),))
    assert monotone_index_next(params, state, MULTIPLAY, M=2) == (2,)
    free = MonotonePolicyState((0, 0, 0), (1, 3, 5))
    assert monotone_index_next(params, free, MULTIPLAY, M=2) == (1, 2)


def test_switching_next_sticks_to_current():
    arms = [_balance((2,), (True,)), _balance((1,), (False,))]
    params = _solution(arms, SWITCHING)
    assert monotone_index_next(params, MonotonePolicyState((0, 0), (3, 9), (), 0), SWITCHING) == (0,)
    assert monotone_index_next(params, MonotonePolicyState((0, 0), (1, 9), (), 0), SWITCHING) == ()
    assert monotone_index_next(params, MonotonePolicyState((0, 0), (3, 9), (), 1), SWITCHING) == (1,)
    with pytest.raises(VariantMismatch):
        monotone_index_next(params, MonotonePolicyState((0, 0), (1, 1)), "other")


def test_waiting_caps(three_state_arm):
    instance = MonotoneInstance((three_state_arm,))
    params = _solution([_balance((2, math.inf, 6), (False, False, False))])
    assert waiting_caps(params, instance) == ((4, 1, 6),)


# Test the balanced policy on the feedback encoding earns at least half the bound
def test_encoded_policy_earns_half_bound(two_arms):
    instance = feedback_as_monotone(two_arms, default_tmax(two_arms))
    solution = solve_balance(instance, BASE)
    policy = MonotoneBalancedPolicy(instance, solution, BASE)
    bound = lp_solve(build_whittle_lp(instance, BASE)).objective
    assert exact_monotone_eval(instance, policy).value >= bound / 2 - 1e-6
