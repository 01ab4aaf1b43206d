import numpy as np
import pytest

from src.core.errors import ParameterOutOfRange, StateSpaceTooLarge
from src.core.types import BAD, GOOD, BeliefState
from src.feedback.baselines import RegionPolicy
from src.feedback.single_arm import policy_reward_R
from src.gallery.instances import index_gap
from src.simulate.exact_eval import exact_feedback_eval
from src.simulate.value_iteration import IDLE, TablePolicy, belief_index, decision_region, vi_optimal


# Test the joint table layout
def test_belief_index():
    assert belief_index(BeliefState(GOOD, 1), 5) == 0
    assert belief_index(BeliefState(GOOD, 5), 5) == 4
    assert belief_index(BeliefState(BAD, 1), 5) == 5
    assert belief_index(BeliefState(BAD, 9), 5) == 9


def test_table_policy_reads_capped_entries():
    policy = TablePolicy(np.array([0, IDLE, 0, IDLE]), caps=(2,))
    assert policy.next_action([BeliefState(GOOD, 1)]) == 0
    assert policy.next_action([BeliefState(GOOD, 7)]) is None
    assert policy.next_action([BeliefState(BAD, 1)]) == 0
    assert policy.required_ages() == [2]
    assert policy.name == "optimal-vi"


# Test a lone arm is always worth playing
def test_single_arm_vi_plays_always(gap_arm):
    result = vi_optimal([gap_arm])
    assert result.average == pytest.approx(policy_reward_R(gap_arm, 1), abs=1e-8)
    assert result.average == pytest.approx(1.0, abs=1e-8)
    assert result.sweeps >= 1
    assert result.values.shape == (2 * result.caps[0],)


# Test input checks
@pytest.mark.parametrize("gamma", [0.0, 1.0, 1.5])
def test_vi_rejects_gamma(gap_arm, gamma):
    with pytest.raises(ParameterOutOfRange, match="gamma"):
        vi_optimal([gap_arm], gamma=gamma)


def test_vi_refuses_large_state_space(two_arms):
    with pytest.raises(StateSpaceTooLarge, match="lower T_cap"):
        vi_optimal(two_arms, max_states=10)


# Test the index-gap instance: optimal region and average rewards
@pytest.mark.slow
def test_index_gap_region_and_values():
    instance = index_gap()
    vi = vi_optimal(instance.arms)
    expected = {k for k in RegionPolicy.optimal_region().region if k[0] != k[1]}
    assert decision_region(vi.policy, k_max=10) == expected
    assert vi.average == pytest.approx(1.46218, abs=1e-3)
    assert exact_feedback_eval(instance.arms, RegionPolicy.square(4)).value == pytest.approx(1.46167, abs=1e-3)
    assert exact_feedback_eval(instance.arms, RegionPolicy.square(3)).value == pytest.approx(1.46104, abs=1e-3)
