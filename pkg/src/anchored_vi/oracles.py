"""Ground-truth solvers used to check the sampled algorithms.

Nothing here draws samples except :func:`monte_carlo_gain`, which exists to
cross-check :func:`policy_gain` by simulation.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.sparse.csgraph import connected_components

from .mdp import (ROW_SUM_TOL, TabularMdp, apply_bellman, apply_bellman_discounted, check_gamma,
                  check_policy, inf_norm, span)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 10_000_000
STATIONARY_TOL = 1e-10
LINEAR_TOL = 1e-10


class OracleNotConverged(RuntimeError):
    """An iterative oracle hit its iteration cap before reaching its tolerance."""

    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"max_iter exceeded after {iterations} iterations "
                         f"(last residual {residual!r})")


class OracleSolveError(RuntimeError):
    """A linear solve failed its residual check."""


@dataclass(frozen=True)
class GainBiasSolution:
    g_star: float
    Q_star: np.ndarray
    h_star: np.ndarray
    residual_span: float
    iterations: int


def exact_anchored_vi(mdp: TabularMdp, Q0=None, tol_span: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER) -> GainBiasSolution:
    """Optimal gain and a bias Q-table by restarted anchored value iteration.

    Anchored iteration from an anchor ``A`` has residual at most
    ``4 span(A - Q*) / (k + 1)``. Whenever the residual has halved since the
    current anchor was set, the current iterate (shifted to min 0) becomes the
    new anchor, which turns the O(1/k) rate into a fast geometric one in
    practice while never doing worse than plain anchoring between restarts.
    """
    if Q0 is None:
        Q0 = np.zeros(mdp.shape)
    anchor = np.array(Q0, dtype=np.float64)
    if anchor.shape != mdp.shape:
        raise ValueError(f"Q0 has shape {anchor.shape}, expected {mdp.shape}")
    Q = anchor
    TQ = apply_bellman(mdp, Q)
    res = span(TQ - Q)
    anchor_res = res
    k = 0
    it = 0
    while res > tol_span:
        if it >= max_iter:
            raise OracleNotConverged(it, res)
        k += 1
        it += 1
        b = k / (k + 2)
        Q = (1.0 - b) * anchor + b * TQ
        TQ = apply_bellman(mdp, Q)
        res = span(TQ - Q)
        if res <= 0.5 * anchor_res:
            shift = Q.min()
            Q = Q - shift
            TQ = TQ - shift
            anchor, anchor_res, k = Q, res, 0
    diff = TQ - Q
    g = 0.5 * (float(diff.max()) + float(diff.min()))
    Q_star = Q - Q.min()
    Q_star.setflags(write=False)
    h = Q_star.max(axis=1)
    h.setflags(write=False)
    return GainBiasSolution(g, Q_star, h, res, it)


def discounted_vi(mdp: TabularMdp, gamma: float, tol_inf: float = 1e-10, Q0=None,
                  history: list | None = None) -> np.ndarray:
    """Discounted optimal Q-table within ``tol_inf`` of the fixed point.

    Plain value iteration, stopped when ``|T(Q) - Q|_inf <= tol_inf (1 - gamma)``.
    When ``history`` is given, the residual of every iterate is appended.
    """
    gamma = check_gamma(gamma)
    Q = np.zeros(mdp.shape) if Q0 is None else np.array(Q0, dtype=np.float64)
    while True:
        TQ = apply_bellman_discounted(mdp, Q, gamma)
        res = inf_norm(TQ - Q)
        if history is not None:
            history.append(res)
        if res <= tol_inf * (1.0 - gamma):
            return TQ
        Q = TQ


def _check_stochastic(P):
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
        raise ValueError("expected a nonempty square matrix")
    if not np.all(np.isfinite(P)) or P.min() < 0:
        raise ValueError("matrix has negative or non-finite entries")
    if np.abs(P.sum(axis=1) - 1.0).max() > ROW_SUM_TOL:
        raise ValueError("matrix is not row-stochastic")
    return P


@dataclass(frozen=True)
class ChainDecomposition:
    recurrent_classes: list
    transient_states: np.ndarray
    class_of: np.ndarray  # class index per state, -1 for transient

    @property
    def is_unichain(self) -> bool:
        return len(self.recurrent_classes) == 1


def recurrent_classes(P) -> ChainDecomposition:
    """Closed communicating classes and transient states of a Markov chain."""
    P = _check_stochastic(P)
    support = P > 0
    n_comp, labels = connected_components(support, directed=True, connection="strong")
    # a component is closed iff no edge leaves it
    src, dst = np.nonzero(support)
    leaves = np.zeros(n_comp, dtype=bool)
    leaves[labels[src][labels[src] != labels[dst]]] = True
    class_of = np.full(P.shape[0], -1, dtype=np.int64)
    classes = []
    for comp in range(n_comp):
        if leaves[comp]:
            continue
        members = np.flatnonzero(labels == comp)
        class_of[members] = len(classes)
        classes.append(members)
    classes.sort(key=lambda c: c[0])
    for i, members in enumerate(classes):
        class_of[members] = i
    return ChainDecomposition(classes, np.flatnonzero(class_of < 0), class_of)


def stationary_distribution(P) -> np.ndarray:
    """Stationary distribution of an irreducible chain.

    Solves ``mu (P - I) = 0`` with the last balance equation replaced by
    ``sum(mu) = 1``.
    """
    P = _check_stochastic(P)
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        mu = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise OracleSolveError(f"stationary system is singular: {exc}") from None
    if mu.min() < -STATIONARY_TOL or inf_norm(mu @ P - mu) > STATIONARY_TOL:
        raise OracleSolveError("stationary solve failed its residual check")
    mu = np.maximum(mu, 0.0)
    return mu / mu.sum()


def policy_gain(mdp: TabularMdp, policy) -> np.ndarray:
    """Long-run average reward of a deterministic policy from every start state.

    Each closed class gets ``mu . r`` under its stationary distribution;
    transient states inherit the absorption-weighted gains.
    """
    pi = check_policy(policy, mdp.n_states, mdp.n_actions)
    P = mdp.policy_matrix(pi)
    r = mdp.policy_rewards(pi)
    chain = recurrent_classes(P)
    g = np.zeros(mdp.n_states)
    for members in chain.recurrent_classes:
        block = P[np.ix_(members, members)]
        g[members] = stationary_distribution(block) @ r[members]
    tr = chain.transient_states
    if tr.size:
        rec = np.flatnonzero(chain.class_of >= 0)
        A = np.eye(tr.size) - P[np.ix_(tr, tr)]
        b = P[np.ix_(tr, rec)] @ g[rec]
        x = np.linalg.solve(A, b)
        if inf_norm(A @ x - b) > LINEAR_TOL:
            raise OracleSolveError("transient gain solve failed its residual check")
        g[tr] = x
    return g


def discounted_policy_q(mdp: TabularMdp, policy, gamma: float) -> np.ndarray:
    """Discounted Q-function of a deterministic policy via one linear solve."""
    gamma = check_gamma(gamma)
    pi = check_policy(policy, mdp.n_states, mdp.n_actions)
    P = mdp.policy_matrix(pi)
    r = mdp.policy_rewards(pi)
    A = np.eye(mdp.n_states) - gamma * P
    V = np.linalg.solve(A, r)
    if inf_norm(A @ V - r) > LINEAR_TOL * max(1.0, inf_norm(V)):
        raise OracleSolveError("policy evaluation failed its residual check")
    return mdp.rewards + gamma * (mdp.transitions @ V)


def monte_carlo_gain(model, policy, horizon: int, seed: int) -> np.ndarray:
    """Empirical average reward of one ``horizon``-step trajectory per start state.

    The reward total is summed exactly, so the only rounding is the final
    division.
    """
    horizon = int(horizon)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    pi = check_policy(policy, model.n_states, model.n_actions)
    r = np.asarray(model.rewards)[np.arange(model.n_states), pi]
    rewards = [Fraction(float(x)) for x in r]
    out = np.empty(model.n_states)
    for s in range(model.n_states):
        visits = model.trajectory_visits(pi, s, horizon, seed)
        total = sum((int(v) * q for v, q in zip(visits, rewards) if v), Fraction(0))
        out[s] = float(total / horizon)
    return out


def all_policies(n_states: int, n_actions: int):
    """Every deterministic policy, in lexicographic order."""
    for actions in itertools.product(range(n_actions), repeat=n_states):
        yield np.array(actions, dtype=np.int64)


def brute_force_optimal_gain(mdp: TabularMdp):
    """``max_pi min_s g_pi(s)`` over all deterministic policies, with a maximiser."""
    best, best_pi = -np.inf, None
    for pi in all_policies(mdp.n_states, mdp.n_actions):
        g = policy_gain(mdp, pi).min()
        if g > best:
            best, best_pi = g, pi
    return float(best), best_pi
