"""Anchored value iteration with recursive sampling, discounted setting.

Same recursion as the average-reward solvers, with infinity-norm batch
sizes, a ``gamma`` factor on every sampled increment and an
infinity-norm stopping rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .average import (DEFAULT_MAX_LOOPS, STANDARD, Schedule, SaviaOutput, SaviaParams,
                      SaviaPlusOutput, _ceil_batch, _check_epsilon, _check_unit_rewards,
                      anchored_loop, doubling_loop)
from .mdp import TabularMdp, check_gamma

STOP_FACTOR = 11.0


def batch_size_discounted(alpha: float, c_k: float, inf_d: float, epsilon: float) -> int:
    """Samples per (s, a): ``max(ceil(2 alpha c_k |d|_inf^2 / eps^2), 1)``."""
    epsilon = _check_epsilon(epsilon)
    if inf_d < 0:
        raise ValueError("inf_d must be nonnegative")
    return _ceil_batch(2.0 * alpha * c_k * inf_d * inf_d / (epsilon * epsilon))


@dataclass(frozen=True)
class SavidParams(SaviaParams):
    gamma: float

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "gamma", check_gamma(self.gamma))


def savid(model, params: SavidParams, schedule: Schedule = STANDARD, *,
          oracle: TabularMdp | None = None, loop: int = 0, callback=None) -> SaviaOutput:
    """Fixed-length sampled anchored value iteration for discounted reward."""
    return anchored_loop(model, params.Q0, params.n, params.epsilon, params.delta, schedule,
                         gamma=params.gamma, oracle=oracle, loop=loop, callback=callback)


def savid_plus(model, Q0, epsilon, delta, gamma, schedule: Schedule = STANDARD,
               max_loops: int = DEFAULT_MAX_LOOPS, *, oracle: TabularMdp | None = None) -> SaviaPlusOutput:
    """Doubling SAVID: stops once ``|T^n - Q^n|_inf <= 11 epsilon``."""
    return doubling_loop(model, Q0, epsilon, delta, schedule, max_loops, STOP_FACTOR,
                         gamma=check_gamma(gamma), oracle=oracle)


def fixed_horizon(epsilon: float, gamma: float) -> int:
    """Iteration count ``ceil(10 / ((1 - gamma) epsilon))``.

    A relative guard of 1e-12 keeps representation error in ``1 - gamma``
    from bumping exact integers (gamma = 0.9, epsilon = 0.5 gives 200).
    """
    x = 10.0 / ((1.0 - check_gamma(gamma)) * _check_epsilon(epsilon))
    return math.ceil(x * (1.0 - 1e-12))


def savid_fixed_horizon(model, epsilon, delta, gamma, schedule: Schedule = STANDARD, *,
                        oracle: TabularMdp | None = None) -> SaviaOutput:
    """Run from ``Q0 = 0`` for :func:`fixed_horizon` iterations at ``epsilon / 10``.

    With probability ``1 - delta`` the final Bellman residual is at most
    ``epsilon``. Rewards must lie in [0, 1] and ``epsilon <= 1 / (1 - gamma)``.
    """
    _check_unit_rewards(model)
    gamma = check_gamma(gamma)
    epsilon = _check_epsilon(epsilon)
    if epsilon > 1.0 / (1.0 - gamma):
        raise ValueError("epsilon must not exceed 1 / (1 - gamma)")
    Q0 = np.zeros((model.n_states, model.n_actions))
    params = SavidParams(Q0, fixed_horizon(epsilon, gamma), epsilon / 10.0, delta, gamma)
    return savid(model, params, schedule, oracle=oracle)


def savid_plus_eps_optimal(model, epsilon, delta, gamma, schedule: Schedule = STANDARD,
                           max_loops: int = DEFAULT_MAX_LOOPS, *, oracle=None) -> SaviaPlusOutput:
    """Run from ``Q0 = 0`` at ``epsilon (1 - gamma) / 24``.

    With probability ``1 - delta`` the greedy policy's Q-function is within
    ``epsilon`` of optimal in the infinity norm. Rewards must lie in [0, 1].
    """
    _check_unit_rewards(model)
    gamma = check_gamma(gamma)
    Q0 = np.zeros((model.n_states, model.n_actions))
    return savid_plus(model, Q0, _check_epsilon(epsilon) * (1.0 - gamma) / 24.0, delta, gamma,
                      schedule, max_loops, oracle=oracle)
