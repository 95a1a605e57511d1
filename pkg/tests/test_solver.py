import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from devicedr.metrics import always_off_policy, baseline_policy, policy_value
from devicedr.model import Action, PriceChain
from devicedr.solver import (
    ConvergenceWarning,
    bellman_backup,
    check_policy,
    greedy,
    load_table,
    policy_iteration,
    policy_q,
    save_table,
    state_values,
    stationary_distribution,
    value_iteration,
)

from conftest import make_minimal


class TestStationary:
    def test_two_state_closed_form(self):
        # P = [[0.8, 0.2], [0.3, 0.7]] has pi = (0.3, 0.2) / 0.5
        chain = PriceChain(prices=[1.0, 2.0], transition=[[0.8, 0.2], [0.3, 0.7]])
        np.testing.assert_allclose(stationary_distribution(chain), [0.6, 0.4], atol=1e-12)

    def test_balance(self, default_model):
        chain = default_model.price_chain
        pi = stationary_distribution(chain)
        np.testing.assert_allclose(pi @ chain.transition, pi, atol=1e-12)
        assert pi.sum() == pytest.approx(1.0) and (pi > 0).all()


class TestBellman:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_contraction(self, tiny, seed):
        r = np.random.default_rng(seed)
        q1 = r.normal(scale=50, size=(10, 2))
        q2 = r.normal(scale=50, size=(10, 2))
        lhs = np.abs(bellman_backup(tiny, q1) - bellman_backup(tiny, q2)).max()
        assert lhs <= tiny.alpha * np.abs(q1 - q2).max() + 1e-9

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_monotone(self, tiny, seed):
        r = np.random.default_rng(seed)
        q1 = r.normal(scale=50, size=(10, 2))
        q2 = q1 + np.abs(r.normal(size=(10, 2)))
        assert (bellman_backup(tiny, q1) <= bellman_backup(tiny, q2) + 1e-12).all()

    def test_fixed_point(self, tiny):
        res = value_iteration(tiny, tol=1e-11)
        assert res.residual <= 1e-11
        np.testing.assert_allclose(bellman_backup(tiny, res.q), res.q, atol=1e-11)

    def test_residual_is_reported_exactly(self, tiny):
        res = value_iteration(tiny, tol=1e-6)
        assert res.residual == pytest.approx(np.abs(bellman_backup(tiny, res.q) - res.q).max())

    def test_nonconvergence_warns(self, tiny):
        with pytest.warns(ConvergenceWarning):
            res = value_iteration(tiny, tol=1e-12, max_iter=3)
        assert res.residual > 1e-12

    def test_wrong_q0_shape(self, tiny):
        with pytest.raises(ValueError):
            value_iteration(tiny, q0=np.zeros((3, 2)))


class TestScalarOracles:
    def test_always_on_geometric_series(self):
        # minimal instance: ON at the idle state costs price*C + gamma*u_e each step
        m = make_minimal(price=10.0, alpha=0.9, gamma=1.0, u_e=2.0)
        mu = np.zeros((2, 2))
        mu[:, Action.ON] = 1.0
        v = state_values(m, mu)
        assert v[0] == pytest.approx(12.0 / (1 - 0.9))

    def test_baseline_on_minimal(self):
        # Idle: wait (cost 0) until a request arrives w.p. 1/2, then pay p*C.
        # v0 = alpha (v0 + v1) / 2, v1 = pC + alpha v0  =>  closed form below.
        p, a = 10.0, 0.9
        m = make_minimal(price=p, alpha=a)
        v = state_values(m, baseline_policy(m))
        v0 = a * p / 2 / (1 - a / 2 - a * a / 2)
        assert v[0] == pytest.approx(v0)
        assert v[1] == pytest.approx(p + a * v0)

    def test_always_off_on_minimal(self):
        # OFF in the request state cancels at cost gamma * u_c = 5 and regenerates:
        # v0 = alpha (v0 + v1) / 2, v1 = 5 + alpha v0.
        a = 0.9
        m = make_minimal(alpha=a)
        v0 = 2.5 * a / (1 - a / 2 - a * a / 2)
        assert policy_value(m, always_off_policy(m)) == pytest.approx(v0)


class TestPolicies:
    def test_greedy_ties_go_off(self):
        q = np.array([[1.0, 1.0], [2.0, 1.0], [0.5, 3.0]])
        np.testing.assert_array_equal(greedy(q)[:, Action.ON], [0, 1, 0])

    def test_check_policy_rejects_bad_rows(self, tiny):
        mu = np.full((10, 2), 0.6)
        with pytest.raises(ValueError):
            check_policy(tiny, mu)

    def test_direct_and_iterative_evaluation_agree(self, default_model):
        mu = baseline_policy(default_model)
        direct = state_values(default_model, mu, method="direct")
        iterative = state_values(default_model, mu, tol=1e-10, method="iterative")
        np.testing.assert_allclose(direct, iterative, atol=1e-6)

    def test_policy_q_consistent(self, tiny):
        mu = baseline_policy(tiny)
        q = policy_q(tiny, mu)
        v = (q * mu).sum(axis=1)
        np.testing.assert_allclose(v, state_values(tiny, mu), atol=1e-9)

    def test_policy_iteration_matches_vi(self, tiny):
        vi = value_iteration(tiny, tol=1e-11)
        pi = policy_iteration(tiny)
        np.testing.assert_allclose(pi.q.min(axis=1), vi.q.min(axis=1), atol=1e-8)
        assert pi.iterations >= 1

    def test_pi_from_baseline(self, default_model):
        with warnings.catch_warnings():
            warnings.simplefilter("error", ConvergenceWarning)
            res = policy_iteration(default_model, mu0=baseline_policy(default_model))
        np.testing.assert_allclose(bellman_backup(default_model, res.q), res.q, atol=1e-7)


def test_table_round_trip(tmp_path, tiny):
    q = value_iteration(tiny).q
    save_table(tmp_path / "q.txt", q)
    text = (tmp_path / "q.txt").read_text().splitlines()
    assert text[0] == "# state action value"
    assert text[1].split()[:2] == ["0", "off"]
    np.testing.assert_array_equal(load_table(tmp_path / "q.txt"), q)
