"""Anchored value iteration with recursive sampling, average-reward setting.

``savia`` runs a fixed number of anchored iterations on sampled Bellman
estimates. ``savia_plus`` wraps it in a doubling loop with an empirical
span-residual stopping rule, so no problem constants are needed up front.
The loop itself lives in :func:`anchored_loop` and is shared with the
discounted solvers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mdp import TabularMdp, apply_bellman, apply_bellman_discounted, greedy_policy, inf_norm, span

STOP_FACTOR = 14.0
DEFAULT_MAX_LOOPS = 40


@dataclass(frozen=True)
class Schedule:
    """Step weights ``beta_k`` and confidence weights ``c_k``.

    ``2 * sum_k 1 / c_k <= 1`` so splitting the failure probability as
    ``delta / c_k`` over iterations (and loops) stays within ``delta``.
    """

    def c(self, k: int) -> float:
        lk = math.log(k + 2)
        return 5.0 * (k + 2) * lk * lk

    def beta(self, k: int) -> float:
        return k / (k + 2)

    def delta_divisor(self, i: int) -> float:
        return self.c(i)


STANDARD = Schedule()


def _check_delta(delta):
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie strictly inside (0, 1), got {delta}")
    return delta


def _check_epsilon(epsilon):
    epsilon = float(epsilon)
    if not epsilon > 0.0 or not math.isfinite(epsilon):
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    return epsilon


def alpha(n_states: int, n_actions: int, n: int, delta: float) -> float:
    """Log confidence factor ``ln(2 |S| |A| (n + 1) / delta)``."""
    delta = _check_delta(delta)
    if n_states < 1 or n_actions < 1 or n < 0:
        raise ValueError("n_states, n_actions must be >= 1 and n >= 0")
    return math.log(2.0 * n_states * n_actions * (n + 1) / delta)


def _ceil_batch(value: float) -> int:
    if not math.isfinite(value):
        raise OverflowError("batch size is not finite")
    return max(math.ceil(value), 1)


def batch_size(alpha: float, c_k: float, span_d: float, epsilon: float) -> int:
    """Samples per (s, a) at one iteration: ``max(ceil(alpha c_k sp(d)^2 / eps^2), 1)``."""
    epsilon = _check_epsilon(epsilon)
    if span_d < 0:
        raise ValueError("span_d must be nonnegative")
    return _ceil_batch(alpha * c_k * span_d * span_d / (epsilon * epsilon))


@dataclass(frozen=True)
class SaviaParams:
    Q0: np.ndarray
    n: int
    epsilon: float
    delta: float

    def __post_init__(self):
        Q0 = np.array(self.Q0, dtype=np.float64)
        if Q0.ndim != 2 or not np.all(np.isfinite(Q0)):
            raise ValueError("Q0 must be a finite (n_states, n_actions) array")
        if int(self.n) != self.n or self.n < 0:
            raise ValueError("n must be a nonnegative integer")
        Q0.setflags(write=False)
        object.__setattr__(self, "Q0", Q0)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "epsilon", _check_epsilon(self.epsilon))
        object.__setattr__(self, "delta", _check_delta(self.delta))


@dataclass
class SolverTrace:
    """Per-iteration diagnostics of one anchored run.

    ``d_norm`` holds ``span(d^k)`` (average reward) or ``|d^k|_inf``
    (discounted), as named by ``norm``. ``empirical_residual`` is the same
    norm of ``T^k - Q^k``. The ``true_residual`` and ``sampling_error``
    (``|T^k - T(Q^k)|_inf``) lists are filled only in oracle mode.
    """

    norm: str
    d_norm: list = field(default_factory=list)
    m: list = field(default_factory=list)
    cumulative_samples: list = field(default_factory=list)
    empirical_residual: list = field(default_factory=list)
    true_residual: list | None = None
    sampling_error: list | None = None

    def __len__(self):
        return len(self.m)

    @property
    def total_samples(self) -> int:
        return self.cumulative_samples[-1] if self.cumulative_samples else 0


@dataclass
class SaviaOutput:
    Q: np.ndarray
    T: np.ndarray
    policy: np.ndarray
    trace: SolverTrace


@dataclass(frozen=True)
class LoopRecord:
    n: int
    delta: float
    stop_value: float
    samples: int
    trace: SolverTrace = field(repr=False, compare=False)


@dataclass
class SaviaPlusOutput:
    final: SaviaOutput
    loop_index: int
    loops: list
    total_samples: int

    @property
    def N(self) -> int:
        return 1 << self.loop_index


class LoopBudgetExhausted(RuntimeError):
    """The doubling loop ran ``max_loops`` times without its stopping rule firing."""

    def __init__(self, loops):
        self.loops = list(loops)
        last = self.loops[-1].stop_value if self.loops else float("nan")
        super().__init__(f"loop budget exhausted after {len(self.loops)} loops "
                         f"(last stop value {last!r})")


def _check_model_q0(model, Q0):
    Q0 = np.asarray(Q0, dtype=np.float64)
    if Q0.shape != (model.n_states, model.n_actions):
        raise ValueError(f"Q0 has shape {Q0.shape}, expected {(model.n_states, model.n_actions)}")
    return Q0


def anchored_loop(model, Q0, n, epsilon, delta, schedule=STANDARD, *, gamma=None,
                  oracle: TabularMdp | None = None, loop=0, callback=None) -> SaviaOutput:
    """Shared recursion of the sampled anchored solvers.

    ``gamma=None`` selects the average-reward rules (span batch sizes,
    undiscounted accumulation); otherwise the discounted rules apply.
    ``callback(k, Q, T)`` sees every iterate and must not mutate it.
    """
    Q0 = _check_model_q0(model, Q0)
    n_states, n_actions = model.n_states, model.n_actions
    a = alpha(n_states, n_actions, n, delta)
    discounted = gamma is not None
    size = inf_norm if discounted else span
    trace = SolverTrace("inf" if discounted else "span")
    if oracle is not None:
        trace.true_residual, trace.sampling_error = [], []
    start = model.total_samples()
    T = np.array(model.rewards, dtype=np.float64)
    h_prev = np.zeros(n_states)
    Q = Q0.copy()
    for k in range(n + 1):
        if k > 0:
            b = schedule.beta(k)
            Q = (1.0 - b) * Q0 + b * T
        h = Q.max(axis=1)
        d = h - h_prev
        dn = size(d)
        if discounted:
            m = _ceil_batch(2.0 * a * schedule.c(k) * dn * dn / (epsilon * epsilon))
        else:
            m = batch_size(a, schedule.c(k), dn, epsilon)
        D = model.sample_matrix(d, m, iteration=k, loop=loop)
        T = T + (gamma * D if discounted else D)
        h_prev = h
        trace.d_norm.append(dn)
        trace.m.append(m)
        trace.cumulative_samples.append(model.total_samples() - start)
        trace.empirical_residual.append(size(T - Q))
        if oracle is not None:
            TQ = apply_bellman_discounted(oracle, Q, gamma) if discounted else apply_bellman(oracle, Q)
            trace.true_residual.append(size(TQ - Q))
            trace.sampling_error.append(inf_norm(T - TQ))
        if callback is not None:
            callback(k, Q, T)
    return SaviaOutput(Q, T, greedy_policy(Q), trace)


def savia(model, params: SaviaParams, schedule: Schedule = STANDARD, *,
          oracle: TabularMdp | None = None, loop: int = 0, callback=None) -> SaviaOutput:
    """Fixed-length sampled anchored value iteration for average reward."""
    return anchored_loop(model, params.Q0, params.n, params.epsilon, params.delta, schedule,
                         oracle=oracle, loop=loop, callback=callback)


def doubling_loop(model, Q0, epsilon, delta, schedule, max_loops, stop_factor, *,
                  gamma=None, oracle=None) -> SaviaPlusOutput:
    """Run loops ``i = 0, 1, ...`` with ``n_i = 2^i`` until the residual rule fires."""
    epsilon = _check_epsilon(epsilon)
    delta = _check_delta(delta)
    if int(max_loops) < 1:
        raise ValueError("max_loops must be >= 1")
    records = []
    used = 0
    for i in range(int(max_loops)):
        n_i = 1 << i
        delta_i = delta / schedule.delta_divisor(i)
        out = anchored_loop(model, Q0, n_i, epsilon, delta_i, schedule, gamma=gamma,
                            oracle=oracle, loop=i)
        stop = out.trace.empirical_residual[-1]
        samples = out.trace.total_samples
        used += samples
        records.append(LoopRecord(n_i, delta_i, stop, samples, out.trace))
        if stop <= stop_factor * epsilon:
            return SaviaPlusOutput(out, i, records, used)
    raise LoopBudgetExhausted(records)


def savia_plus(model, Q0, epsilon, delta, schedule: Schedule = STANDARD,
               max_loops: int = DEFAULT_MAX_LOOPS, *, oracle: TabularMdp | None = None) -> SaviaPlusOutput:
    """Doubling SAVIA: stops once ``span(T^n - Q^n) <= 14 epsilon``.

    Each loop restarts from ``Q0`` on fresh sample streams (the loop index
    is part of every stream key).
    """
    return doubling_loop(model, Q0, epsilon, delta, schedule, max_loops, STOP_FACTOR, oracle=oracle)


def _check_unit_rewards(model):
    r = np.asarray(model.rewards)
    if r.min() < 0.0 or r.max() > 1.0:
        raise ValueError("rewards must lie in [0, 1]")


def savia_plus_eps_optimal(model, epsilon, delta, schedule: Schedule = STANDARD,
                           max_loops: int = DEFAULT_MAX_LOOPS, *, oracle=None) -> SaviaPlusOutput:
    """Run from ``Q0 = 0`` at accuracy ``epsilon / 16``.

    With probability ``1 - delta`` the greedy policy is ``epsilon``-optimal.
    Rewards must lie in [0, 1].
    """
    _check_unit_rewards(model)
    Q0 = np.zeros((model.n_states, model.n_actions))
    return savia_plus(model, Q0, _check_epsilon(epsilon) / 16.0, delta, schedule, max_loops,
                      oracle=oracle)


def savia_plus_eps_optimal_expected(model, epsilon, schedule: Schedule = STANDARD,
                                    max_loops: int = DEFAULT_MAX_LOOPS, *, oracle=None) -> SaviaPlusOutput:
    """Run from ``Q0 = 0`` at ``epsilon / 17`` with ``delta = epsilon^2 / 17``.

    The greedy policy is then ``epsilon``-optimal in expectation. Needs
    ``epsilon < sqrt(17)`` so that delta stays below 1.
    """
    _check_unit_rewards(model)
    epsilon = _check_epsilon(epsilon)
    Q0 = np.zeros((model.n_states, model.n_actions))
    return savia_plus(model, Q0, epsilon / 17.0, epsilon * epsilon / 17.0, schedule, max_loops,
                      oracle=oracle)


class _ExactModel:
    """Stands in for a generative model: returns exact expectations, costs nothing."""

    def __init__(self, mdp: TabularMdp):
        self._mdp = mdp
        self.n_states, self.n_actions = mdp.n_states, mdp.n_actions
        self.rewards = mdp.rewards

    def total_samples(self):
        return 0

    def sample_matrix(self, d, m, iteration=0, loop=0):
        return self._mdp.transitions @ d


def exact_savia(mdp: TabularMdp, Q0, n: int, schedule: Schedule = STANDARD, *,
                gamma=None, callback=None) -> SaviaOutput:
    """Anchored value iteration with the exact Bellman operator.

    Same recursion and trace as :func:`savia`, except that each increment
    is propagated exactly, so ``T^k`` equals ``T(Q^k)`` up to rounding and no
    samples are drawn. The ``m`` entries of the trace are the batch sizes
    the sampled run would have used with ``epsilon = delta = 0.5``.
    """
    return anchored_loop(_ExactModel(mdp), Q0, n, 0.5, 0.5, schedule, gamma=gamma, callback=callback)
