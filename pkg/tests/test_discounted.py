import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from anchored_vi.average import STANDARD, LoopBudgetExhausted, alpha
from anchored_vi.discounted import (SavidParams, batch_size_discounted, fixed_horizon, savid,
                                    savid_fixed_horizon, savid_plus, savid_plus_eps_optimal)
from anchored_vi.generative import GenerativeModel
from anchored_vi.generators import gen_garnet
from anchored_vi.mdp import apply_bellman_discounted, inf_norm
from anchored_vi.oracles import discounted_policy_q, discounted_vi

from conftest import mdps


class TestBatchSize:
    def test_examples(self):
        assert batch_size_discounted(2.0, 3.0, 0.0, 0.1) == 1
        assert batch_size_discounted(1.0, 1.0, 1.0, 1.0) == 2
        assert batch_size_discounted(alpha(2, 2, 1, 0.1), STANDARD.c(0), 1.0, 0.5) == 196

    def test_rejects_epsilon(self):
        with pytest.raises(ValueError):
            batch_size_discounted(1.0, 1.0, 1.0, 0.0)

    def test_fixed_horizon(self):
        assert fixed_horizon(0.5, 0.9) == 200
        assert fixed_horizon(1.0, 0.5) == 20

    @pytest.mark.parametrize("gamma", [0.0, 1.0, 1.2])
    def test_gamma_validated(self, gamma):
        with pytest.raises(ValueError):
            SavidParams(np.zeros((2, 2)), 3, 0.1, 0.1, gamma)


def _run(mdp, seed, n, gamma=0.8, eps=0.5, delta=0.2, Q0=None, **kw):
    Q0 = np.zeros(mdp.shape) if Q0 is None else Q0
    model = GenerativeModel(mdp, seed)
    return model, savid(model, SavidParams(Q0, n, eps, delta, gamma), oracle=mdp, **kw)


class TestSavid:
    @given(mdps(), st.integers(0, 2**32 - 1))
    def test_first_iterate_is_anchor(self, mdp, seed):
        Q0 = np.random.default_rng(seed).normal(size=mdp.shape)
        seen = {}
        _run(mdp, seed, 2, Q0=Q0, callback=lambda k, Q, T: seen.setdefault(k, Q.copy()))
        np.testing.assert_array_equal(seen[0], Q0)

    @given(mdps(deterministic=True), st.integers(0, 2**32 - 1), st.integers(0, 30),
           st.floats(0.1, 0.95))
    def test_point_mass_model_matches_exact_operator(self, mdp, seed, n, gamma):
        gaps = []
        _run(mdp, seed, n, gamma=gamma,
             callback=lambda k, Q, T: gaps.append(inf_norm(T - apply_bellman_discounted(mdp, Q, gamma))))
        assert max(gaps) <= 1e-12 * (n + 1)

    @given(mdps(), st.integers(0, 2**32 - 1), st.integers(0, 10), st.floats(0.1, 0.95))
    def test_trace_and_increment_bound(self, mdp, seed, n, gamma):
        model, out = _run(mdp, seed, n, gamma=gamma)
        tr = out.trace
        assert tr.norm == "inf" and len(tr) == n + 1
        assert model.total_samples() == mdp.n_states * mdp.n_actions * sum(tr.m)
        # rewards lie in [0, 1] and Q0 = 0
        assert max(tr.d_norm) <= 1.0 / (1.0 - gamma)
        assert tr.empirical_residual[-1] == inf_norm(out.T - out.Q)

    def test_batch_rule_uses_infinity_norm(self):
        mdp = gen_garnet(3, 2, 3, seed=0)
        _, out = _run(mdp, 0, 4, eps=0.3, delta=0.2)
        a = alpha(3, 2, 4, 0.2)
        for k, (m, dn) in enumerate(zip(out.trace.m, out.trace.d_norm)):
            assert m == batch_size_discounted(a, STANDARD.c(k), dn, 0.3)

    def test_policy_conversion_bound(self):
        mdp = gen_garnet(5, 2, 3, seed=2)
        gamma = 0.8
        Q_star = discounted_vi(mdp, gamma, 1e-12)
        for seed in range(6):
            _, out = _run(mdp, seed, 10, gamma=gamma, eps=0.4)
            Q_pi = discounted_policy_q(mdp, out.policy, gamma)
            res = inf_norm(apply_bellman_discounted(mdp, out.Q, gamma) - out.Q)
            assert inf_norm(Q_star - Q_pi) <= 2 * res / (1 - gamma) + 1e-9

    def test_fixed_horizon_entry_point(self):
        mdp = gen_garnet(3, 2, 2, seed=1)
        out = savid_fixed_horizon(GenerativeModel(mdp, 0), 2.0, 0.1, 0.5, oracle=mdp)
        assert len(out.trace) == fixed_horizon(2.0, 0.5) + 1
        assert out.trace.true_residual[-1] <= 2.0
        with pytest.raises(ValueError):
            savid_fixed_horizon(GenerativeModel(mdp, 0), 3.0, 0.1, 0.5)


class TestSavidPlus:
    def test_immediate_stop_at_fixed_point(self):
        mdp = gen_garnet(4, 2, 3, seed=3)
        Q_star = discounted_vi(mdp, 0.9, 1e-12)
        out = savid_plus(GenerativeModel(mdp, 0), Q_star, 0.05, 0.1, 0.9)
        assert out.loop_index == 0

    def test_stopping_rule_holds_on_output(self):
        mdp = gen_garnet(3, 2, 2, seed=4)
        out = savid_plus(GenerativeModel(mdp, 1), np.zeros(mdp.shape), 0.05, 0.1, 0.9, oracle=mdp)
        assert out.loop_index >= 1
        final = out.final
        assert inf_norm(final.T - final.Q) <= 11 * 0.05
        assert out.loops[-1].stop_value == inf_norm(final.T - final.Q)
        assert all(r.stop_value > 11 * 0.05 for r in out.loops[:-1])
        assert out.total_samples == sum(r.samples for r in out.loops)
        assert final.trace.true_residual[-1] <= 12 * 0.05

    def test_budget_exhausted(self):
        mdp = gen_garnet(3, 2, 2, seed=4)
        with pytest.raises(LoopBudgetExhausted):
            savid_plus(GenerativeModel(mdp, 1), np.zeros(mdp.shape), 0.05, 0.1, 0.9, max_loops=1)

    def test_policy_entry_point_scales_epsilon(self):
        mdp = gen_garnet(3, 2, 2, seed=5)
        gamma = 0.5
        out = savid_plus_eps_optimal(GenerativeModel(mdp, 2), 4.8, 0.1, gamma)
        direct = savid_plus(GenerativeModel(mdp, 2), np.zeros(mdp.shape), 4.8 * 0.5 / 24, 0.1, gamma)
        assert out.total_samples == direct.total_samples
        Q_pi = discounted_policy_q(mdp, out.final.policy, gamma)
        assert inf_norm(discounted_vi(mdp, gamma, 1e-12) - Q_pi) <= 4.8
        assert not math.isnan(out.final.Q.sum())
