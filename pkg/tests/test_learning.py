import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from devicedr.env import DeviceEnv, RngStream
from devicedr.learning import (
    LearnerConfig,
    StepSize,
    behavioral_action,
    boltzmann_on_probability,
    default_episodes,
    learn,
    td_update,
)
from devicedr.model import Action


def test_step_size_schedule():
    beta = StepSize()
    assert beta(0) == pytest.approx(0.5)
    assert beta(80) == pytest.approx(0.1)
    assert StepSize(1.0, 1.0, 0.5)(3) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        StepSize(scale=0.0)


def test_default_episode_budget():
    assert default_episodes(0.9995) == 4000
    assert default_episodes(0.95) == 40
    assert LearnerConfig(episodes=7).episode_budget(0.9) == 7


@pytest.mark.parametrize("kwargs", [{"epsilon": 1.5}, {"eta": 0.0}, {"episodes": 0}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        LearnerConfig(**kwargs)


def test_td_update_arithmetic():
    q = np.zeros((3, 2))
    td_update(q, 0, Action.ON, cost=10.0, x_next=1, beta=0.5, alpha=0.9)
    assert q[0, Action.ON] == 5.0
    q[1] = [2.0, 4.0]
    td_update(q, 0, Action.OFF, cost=1.0, x_next=1, beta=1.0, alpha=0.5)
    assert q[0, Action.OFF] == 2.0  # 1 + 0.5 * min(2, 4)


class TestBoltzmann:
    def test_equal_values(self):
        assert boltzmann_on_probability(3.0, 3.0, 0.1) == 0.5

    def test_prefers_lower_cost(self):
        assert boltzmann_on_probability(1.0, 0.0, 1.0) == pytest.approx(1 / (1 + math.exp(-1)))

    def test_extreme_values_are_finite(self):
        assert boltzmann_on_probability(0.0, 1e6, 1e-3) == 0.0
        assert boltzmann_on_probability(1e6, 0.0, 1e-3) == 1.0

    @given(
        st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(0.01, 100)
    )
    def test_shift_invariance(self, a, b, shift, eta):
        p1 = boltzmann_on_probability(a, b, eta)
        p2 = boltzmann_on_probability(a + shift, b + shift, eta)
        assert p1 == pytest.approx(p2, abs=1e-9)


class TestBehavioralAction:
    def test_greedy_when_no_exploration(self, tiny):
        q = np.zeros((10, 2))
        q[:, Action.ON] = -1.0
        cfg = LearnerConfig(epsilon=0.0)
        rng = RngStream(0)
        assert all(behavioral_action(q, i, cfg, rng) == Action.ON for i in range(10))

    def test_ties_go_off(self):
        cfg = LearnerConfig(epsilon=0.0)
        assert behavioral_action(np.zeros((2, 2)), 0, cfg, RngStream(0)) == Action.OFF

    def test_exploration_rate(self):
        q = np.array([[0.0, 1.0]])
        cfg = LearnerConfig(epsilon=0.2, eta=1e-6)  # near-deterministic softmin also picks OFF
        rng = RngStream(1)
        cfg_flat = LearnerConfig(epsilon=0.2, eta=1e6)
        on = sum(behavioral_action(q, 0, cfg_flat, rng) for _ in range(20000))
        assert on / 20000 == pytest.approx(0.1, abs=0.01)
        assert sum(behavioral_action(q, 0, cfg, rng) for _ in range(2000)) == 0


class TestLearn:
    def test_reproducible(self, tiny):
        cfg = LearnerConfig(episodes=50)
        a = learn(DeviceEnv(tiny), cfg, RngStream(3))
        b = learn(DeviceEnv(tiny), cfg, RngStream(3))
        np.testing.assert_array_equal(a.q, b.q)
        assert a.discounted_cost == b.discounted_cost

    def test_bookkeeping(self, tiny):
        res = learn(DeviceEnv(tiny), LearnerConfig(episodes=30), RngStream(4))
        assert len(res.episode_costs) == 30
        assert res.visits.sum() == res.steps
        assert res.discounted_cost == pytest.approx(math.fsum(res.episode_costs))
        assert res.tail_bound == pytest.approx(tiny.kernel.max_cost * tiny.alpha ** res.steps / (1 - tiny.alpha))

    def test_q_init(self, tiny):
        res = learn(DeviceEnv(tiny), LearnerConfig(episodes=1, q_init=7.0), RngStream(5))
        assert (res.q[res.visits == 0] == 7.0).all()

    def test_episode_log(self, tiny):
        buf = io.StringIO()
        learn(DeviceEnv(tiny), LearnerConfig(episodes=4), RngStream(6), episode_log=buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "episode,length,discounted_cost,beta"
        assert len(lines) == 5
        assert float(lines[1].split(",")[3]) == pytest.approx(0.5)
