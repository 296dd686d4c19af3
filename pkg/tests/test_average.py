import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from anchored_vi.average import (STANDARD, LoopBudgetExhausted, SaviaParams, alpha,
                                 batch_size, exact_savia, savia, savia_plus,
                                 savia_plus_eps_optimal, savia_plus_eps_optimal_expected)
from anchored_vi.generative import GenerativeModel
from anchored_vi.generators import gen_cycle, gen_garnet, gen_river_swim
from anchored_vi.mdp import apply_bellman, greedy_policy, inf_norm, span
from anchored_vi.oracles import exact_anchored_vi, policy_gain

from conftest import mdps, random_mdp


class TestSchedule:
    def test_closed_forms(self):
        assert STANDARD.beta(0) == 0.0
        assert STANDARD.beta(2) == 0.5
        assert STANDARD.c(0) == pytest.approx(4.80453013918201, rel=1e-14)
        assert STANDARD.delta_divisor(3) == STANDARD.c(3)

    def test_beta_strictly_increasing_to_one(self):
        b = np.array([STANDARD.beta(k) for k in range(10_000)])
        assert np.all(np.diff(b) > 0) and b[-1] < 1 and b[-1] > 0.9997

    def test_confidence_weights_sum_below_one(self):
        k = np.arange(1_000_001, dtype=np.float64)
        c = 5.0 * (k + 2) * np.log(k + 2) ** 2
        partial = 2 * np.cumsum(1.0 / c)
        assert partial[-1] <= 1.0
        # tail beyond K is at most the integral 1 / (5 ln(K + 1))
        assert partial[-1] + 2 / (5 * math.log(1_000_001)) <= 1.0


class TestFormulas:
    def test_alpha_examples(self):
        assert alpha(2, 2, 1, 0.1) == pytest.approx(math.log(160), rel=1e-15)
        assert alpha(2, 2, 1, 0.1) == pytest.approx(5.07517381523383, rel=1e-13)
        assert alpha(1, 1, 0, 2 / math.e) == pytest.approx(1.0, rel=1e-15)
        assert alpha(3, 2, 5, 0.2) < alpha(3, 2, 5, 0.1)

    @pytest.mark.parametrize("delta", [0.0, 1.0, -0.5, 2.0])
    def test_alpha_rejects_delta(self, delta):
        with pytest.raises(ValueError):
            alpha(2, 2, 1, delta)

    def test_batch_size_examples(self):
        assert batch_size(3.0, 2.0, 0.0, 0.01) == 1
        assert batch_size(1.0, 1.0, 1.0, 1.0) == 1
        assert batch_size(alpha(2, 2, 1, 0.1), STANDARD.c(0), 2.0, 0.5) == 391

    @pytest.mark.parametrize("eps", [0.0, -1.0])
    def test_batch_size_rejects_epsilon(self, eps):
        with pytest.raises(ValueError):
            batch_size(1.0, 1.0, 1.0, eps)

    @given(st.floats(0.1, 50), st.floats(1, 1e4), st.floats(0, 10), st.floats(0.01, 10))
    def test_batch_size_is_formula_ceiling(self, a, c, sd, eps):
        m = batch_size(a, c, sd, eps)
        assert m >= 1
        assert m == max(math.ceil(a * c * sd * sd / (eps * eps)), 1)

    def test_params_validation(self):
        with pytest.raises(ValueError):
            SaviaParams(np.zeros((2, 2)), -1, 0.1, 0.1)
        with pytest.raises(ValueError):
            SaviaParams(np.zeros((2, 2)), 3, 0.0, 0.1)
        with pytest.raises(ValueError):
            SaviaParams(np.zeros((2, 2)), 3, 0.1, 1.0)
        with pytest.raises(ValueError):
            SaviaParams(np.full((2, 2), np.nan), 3, 0.1, 0.1)


def _run(mdp, seed, n, eps=0.5, delta=0.2, Q0=None, **kw):
    Q0 = np.zeros(mdp.shape) if Q0 is None else Q0
    model = GenerativeModel(mdp, seed)
    return model, savia(model, SaviaParams(Q0, n, eps, delta), oracle=mdp, **kw)


class TestSavia:
    @given(mdps(), st.integers(0, 2**32 - 1))
    def test_first_iterate_is_anchor(self, mdp, seed):
        Q0 = np.random.default_rng(seed).normal(size=mdp.shape)
        seen = {}
        _run(mdp, seed, 0, Q0=Q0, callback=lambda k, Q, T: seen.setdefault(k, Q.copy()))
        np.testing.assert_array_equal(seen[0], Q0)

    @given(mdps(deterministic=True), st.integers(0, 2**32 - 1), st.integers(0, 30))
    def test_point_mass_model_matches_exact_operator(self, mdp, seed, n):
        Q0 = np.random.default_rng(seed).uniform(size=mdp.shape)
        gaps = []

        def check(k, Q, T):
            gaps.append(inf_norm(T - apply_bellman(mdp, Q)))

        model, out = _run(mdp, seed, n, Q0=Q0, callback=check)
        assert max(gaps) <= 1e-12 * (n + 1)
        exact = exact_savia(mdp, Q0, n)
        np.testing.assert_allclose(out.Q, exact.Q, rtol=0, atol=1e-12 * (n + 1))

    @given(mdps(), st.integers(0, 2**32 - 1), st.integers(0, 12))
    def test_trace_identities(self, mdp, seed, n):
        Q0 = np.random.default_rng(seed).uniform(-1, 1, size=mdp.shape)
        model, out = _run(mdp, seed, n, eps=0.3, Q0=Q0)
        tr = out.trace
        assert len(tr) == n + 1 and tr.norm == "span"
        assert all(m >= 1 for m in tr.m)
        assert np.all(np.diff(tr.cumulative_samples) >= 0)
        assert model.total_samples() == mdp.n_states * mdp.n_actions * sum(tr.m)
        assert tr.cumulative_samples[-1] == model.total_samples()
        np.testing.assert_array_equal(out.policy, greedy_policy(out.Q))
        assert tr.empirical_residual[-1] == span(out.T - out.Q)

    @given(mdps(), st.integers(0, 2**32 - 1), st.integers(0, 16))
    def test_increment_span_bounded_by_reward_and_anchor_spans(self, mdp, seed, n):
        Q0 = np.random.default_rng(seed).uniform(-2, 2, size=mdp.shape)
        _, out = _run(mdp, seed, n, eps=0.4, Q0=Q0)
        kappa = max(span(mdp.rewards), span(Q0))
        assert max(out.trace.d_norm) <= kappa

    @given(mdps(), st.integers(0, 2**32 - 1), st.integers(0, 10))
    def test_telescoping_sum(self, mdp, seed, n):
        mats = []
        model = GenerativeModel(mdp, seed)
        orig = model.sample_matrix

        def record(d, m, iteration=0, loop=0):
            D = orig(d, m, iteration, loop)
            mats.append(D)
            return D

        model.sample_matrix = record
        out = savia(model, SaviaParams(np.zeros(mdp.shape), n, 0.5, 0.2))
        np.testing.assert_allclose(out.T, mdp.rewards + np.sum(mats, axis=0), rtol=0, atol=1e-12)

    def test_reproducible_from_seed(self):
        mdp = gen_garnet(5, 2, 3, seed=3)
        a = _run(mdp, 17, 8)[1]
        b = _run(mdp, 17, 8)[1]
        np.testing.assert_array_equal(a.T, b.T)
        assert a.trace.m == b.trace.m

    def test_empirical_and_true_residual_close_when_sampling_accurate(self):
        mdp = gen_garnet(6, 2, 3, seed=1)
        eps = 0.2
        checked = 0
        for seed in range(20):
            _, out = _run(mdp, seed, 16, eps=eps, delta=0.1)
            tr = out.trace
            if max(tr.sampling_error) <= eps:
                checked += 1
                gaps = np.abs(np.subtract(tr.empirical_residual, tr.true_residual))
                assert gaps.max() <= 2 * eps
        assert checked >= 15

    def test_policy_gap_dominated_by_true_residual(self):
        for mdp in (gen_river_swim(4), gen_garnet(5, 3, 2, seed=9)):
            g_star = exact_anchored_vi(mdp).g_star
            for seed in range(5):
                _, out = _run(mdp, seed, 8, eps=0.3)
                gap = g_star - policy_gain(mdp, out.policy)
                assert gap.min() >= -1e-8
                assert gap.max() <= out.trace.true_residual[-1] + 1e-8

    def test_model_without_transitions_suffices(self):
        # the solver only touches the public sampling surface
        mdp = gen_cycle(3)

        class Opaque:
            def __init__(self):
                self._inner = GenerativeModel(mdp, 0)
                self.n_states, self.n_actions = 3, 1
                self.rewards = mdp.rewards

            def total_samples(self):
                return self._inner.total_samples()

            def sample_matrix(self, d, m, iteration=0, loop=0):
                return self._inner.sample_matrix(d, m, iteration, loop)

        out = savia(Opaque(), SaviaParams(np.zeros((3, 1)), 5, 0.5, 0.1))
        assert out.trace.true_residual is None


class TestSaviaPlus:
    def test_immediate_stop(self):
        mdp = gen_cycle(2)
        sol = exact_anchored_vi(mdp)
        out = savia_plus(GenerativeModel(mdp, 0), sol.Q_star, 0.01, 0.1)
        assert out.loop_index == 0 and out.N == 1
        assert len(out.loops) == 1

    def test_stopping_rule_holds_on_output(self):
        mdp = gen_river_swim(3)
        Q0 = np.random.default_rng(0).uniform(size=mdp.shape) * 6
        out = savia_plus(GenerativeModel(mdp, 4), Q0, 0.2, 0.1)
        assert out.loop_index >= 2
        assert span(out.final.T - out.final.Q) <= 14 * 0.2
        assert out.loops[-1].stop_value == span(out.final.T - out.final.Q)
        assert all(r.stop_value > 14 * 0.2 for r in out.loops[:-1])
        assert out.total_samples == sum(r.samples for r in out.loops)
        assert [r.n for r in out.loops] == [2**i for i in range(len(out.loops))]
        for i, r in enumerate(out.loops):
            assert r.delta == pytest.approx(0.1 / STANDARD.c(i), rel=1e-15)

    def test_loop_budget_exhausted_is_distinct_error(self):
        mdp = gen_cycle(2)
        Q0 = np.array([[0.0], [30.0]])
        with pytest.raises(LoopBudgetExhausted, match="loop budget exhausted") as info:
            savia_plus(GenerativeModel(mdp, 0), Q0, 0.5, 0.1, max_loops=2)
        assert len(info.value.loops) == 2
        assert savia_plus(GenerativeModel(mdp, 0), Q0, 0.5, 0.1).loop_index >= 2
        with pytest.raises(ValueError):
            savia_plus(GenerativeModel(mdp, 0), np.zeros(mdp.shape), 0.1, 0.1, max_loops=0)

    def test_loops_use_independent_streams(self):
        mdp = gen_garnet(4, 2, 4, seed=2)
        model = GenerativeModel(mdp, 3)
        d = np.arange(4.0)
        a = model.sample_matrix(d, 50, iteration=0, loop=0)
        b = model.sample_matrix(d, 50, iteration=0, loop=1)
        assert not np.array_equal(a, b)

    def test_accuracy_wrappers(self):
        mdp = gen_garnet(4, 2, 2, seed=5)
        out = savia_plus_eps_optimal(GenerativeModel(mdp, 1), 0.8, 0.1)
        direct = savia_plus(GenerativeModel(mdp, 1), np.zeros(mdp.shape), 0.05, 0.1)
        assert out.total_samples == direct.total_samples
        out = savia_plus_eps_optimal_expected(GenerativeModel(mdp, 1), 0.85)
        direct = savia_plus(GenerativeModel(mdp, 1), np.zeros(mdp.shape), 0.05, 0.85**2 / 17)
        assert out.total_samples == direct.total_samples
        bad = random_mdp(np.random.default_rng(0), 2, 2)
        big = type(bad)(bad.transitions, bad.rewards * 3)
        with pytest.raises(ValueError):
            savia_plus_eps_optimal(GenerativeModel(big, 0), 0.5, 0.1)


class TestExactSavia:
    def test_fixed_point_anchor_has_zero_residual(self):
        for mdp in (gen_cycle(3), gen_garnet(5, 2, 3, seed=0)):
            sol = exact_anchored_vi(mdp)
            res = []
            exact_savia(mdp, sol.Q_star, 50,
                        callback=lambda k, Q, T: res.append(span(apply_bellman(mdp, Q) - Q)))
            assert max(res) <= 1e-8

    @pytest.mark.parametrize("seed", range(3))
    def test_residual_decays_as_one_over_k(self, seed):
        mdp = gen_garnet(5, 3, 2, seed=seed)
        Q0 = np.random.default_rng(seed).uniform(size=mdp.shape)
        mu = span(Q0 - exact_anchored_vi(mdp).Q_star)
        res = []
        exact_savia(mdp, Q0, 1000, callback=lambda k, Q, T: res.append(span(apply_bellman(mdp, Q) - Q)))
        bound = 4 * mu / (np.arange(1001) + 1)
        assert np.all(np.array(res) <= bound + 1e-8)

    def test_distance_to_fixed_point_never_grows(self):
        mdp = gen_river_swim(5)
        Q0 = np.random.default_rng(1).uniform(size=mdp.shape)
        Q_star = exact_anchored_vi(mdp).Q_star
        mu = span(Q0 - Q_star)
        dist = []
        exact_savia(mdp, Q0, 300, callback=lambda k, Q, T: dist.append(span(Q - Q_star)))
        assert max(dist) <= mu + 1e-8

    def test_gain_shift_changes_iterates_by_constants_only(self):
        mdp = gen_garnet(4, 2, 3, seed=7)
        g = exact_anchored_vi(mdp).g_star
        Q0 = np.zeros(mdp.shape)
        plain = []
        exact_savia(mdp, Q0, 40, callback=lambda k, Q, T: plain.append(Q.copy()))
        Q = Q0
        for k in range(41):
            if k > 0:
                b = STANDARD.beta(k)
                Q = (1 - b) * Q0 + b * (apply_bellman(mdp, Q) - g)
            assert span(plain[k] - Q) <= 1e-10

    def test_consumes_no_samples(self):
        out = exact_savia(gen_cycle(3), np.zeros((3, 1)), 10)
        assert out.trace.total_samples == 0

    def test_discounted_mode(self):
        mdp = gen_garnet(4, 2, 3, seed=1)
        out = exact_savia(mdp, np.zeros(mdp.shape), 200, gamma=0.5)
        from anchored_vi.mdp import apply_bellman_discounted
        np.testing.assert_allclose(out.T, apply_bellman_discounted(mdp, out.Q, 0.5), atol=1e-12)
