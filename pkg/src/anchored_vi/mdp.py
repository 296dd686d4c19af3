"""Tabular MDPs, seminorms and exact Bellman operators.

Q-tables are ``(n_states, n_actions)`` float arrays and value vectors are
``(n_states,)`` arrays; policies are integer arrays of action indices.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ROW_SUM_TOL = 1e-12


class InvalidMdpError(ValueError):
    """Raised when an MDP violates its stochasticity or finiteness invariants."""

    def __init__(self, problems):
        self.problems = list(problems)
        head = "; ".join(str(p) for p in self.problems[:5])
        more = f" (+{len(self.problems) - 5} more)" if len(self.problems) > 5 else ""
        super().__init__(f"invalid MDP: {head}{more}")


@dataclass(frozen=True)
class Problem:
    """One violated invariant, with the offending indices."""

    kind: str
    index: tuple
    value: float

    def __str__(self):
        return f"{self.kind} at {self.index}: {self.value!r}"


def validate(transitions, rewards=None) -> list[Problem]:
    """Every violated invariant of ``(transitions, rewards)``; empty when valid.

    Accepts raw arrays or anything with ``transitions``/``rewards``
    attributes. Never raises on bad content, only collects. Shape problems
    are reported under kind ``"shape"``.
    """
    if rewards is None:
        transitions, rewards = transitions.transitions, transitions.rewards
    P = np.asarray(transitions, dtype=np.float64)
    r = np.asarray(rewards, dtype=np.float64)
    problems = []
    if P.ndim != 3 or P.shape[0] != P.shape[2] or r.shape != P.shape[:2]:
        return [Problem("shape", (P.shape, r.shape), float("nan"))]
    if P.shape[0] == 0 or P.shape[1] == 0:
        return [Problem("shape", (P.shape, r.shape), float("nan"))]
    for s, a, t in zip(*np.nonzero(~np.isfinite(P))):
        problems.append(Problem("non-finite probability", (int(s), int(a), int(t)), float(P[s, a, t])))
    for s, a, t in zip(*np.nonzero(P < 0)):
        problems.append(Problem("negative probability", (int(s), int(a), int(t)), float(P[s, a, t])))
    sums = P.sum(axis=2)
    bad = ~(np.abs(sums - 1.0) <= ROW_SUM_TOL)
    for s, a in zip(*np.nonzero(bad)):
        problems.append(Problem("row sum != 1", (int(s), int(a)), float(sums[s, a])))
    for s, a in zip(*np.nonzero(~np.isfinite(r))):
        problems.append(Problem("non-finite reward", (int(s), int(a)), float(r[s, a])))
    return problems


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """Finite MDP with dense transitions ``P[s, a, s']`` and rewards ``r[s, a]``.

    Construction validates the model and freezes copies of the arrays.
    """

    transitions: np.ndarray
    rewards: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        P = np.array(self.transitions, dtype=np.float64)
        r = np.array(self.rewards, dtype=np.float64)
        problems = validate(P, r)
        if problems:
            raise InvalidMdpError(problems)
        P.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "transitions", P)
        object.__setattr__(self, "rewards", r)

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[1]

    @property
    def shape(self):
        return self.rewards.shape

    def policy_matrix(self, policy) -> np.ndarray:
        """Transition matrix of the chain induced by a deterministic policy."""
        pi = check_policy(policy, self.n_states, self.n_actions)
        return self.transitions[np.arange(self.n_states), pi]

    def policy_rewards(self, policy) -> np.ndarray:
        pi = check_policy(policy, self.n_states, self.n_actions)
        return self.rewards[np.arange(self.n_states), pi]


def check_policy(policy, n_states, n_actions) -> np.ndarray:
    pi = np.asarray(policy)
    if pi.shape != (n_states,) or not np.issubdtype(pi.dtype, np.integer):
        raise ValueError(f"policy must be an integer vector of length {n_states}")
    if pi.size and (pi.min() < 0 or pi.max() >= n_actions):
        raise ValueError("policy contains an invalid action index")
    return pi


def check_gamma(gamma) -> float:
    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"discount factor must lie strictly inside (0, 1), got {gamma}")
    return gamma


def _nonempty(v):
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("empty vector")
    return v


def span(v) -> float:
    """Span seminorm, max entry minus min entry, over all entries."""
    v = _nonempty(v)
    return float(v.max() - v.min())


def inf_norm(v) -> float:
    v = _nonempty(v)
    return float(np.abs(v).max())


def max_over_actions(Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 2:
        raise ValueError("Q must be a (n_states, n_actions) array")
    return Q.max(axis=1)


def _check_q(mdp, Q):
    Q = np.asarray(Q, dtype=np.float64)
    if Q.shape != mdp.shape:
        raise ValueError(f"Q has shape {Q.shape}, expected {mdp.shape}")
    return Q


def apply_bellman(mdp: TabularMdp, Q) -> np.ndarray:
    """Undiscounted Bellman map ``r + P max_a Q``."""
    Q = _check_q(mdp, Q)
    return mdp.rewards + mdp.transitions @ Q.max(axis=1)


def apply_bellman_discounted(mdp: TabularMdp, Q, gamma) -> np.ndarray:
    """Discounted Bellman map ``r + gamma P max_a Q``."""
    Q = _check_q(mdp, Q)
    return mdp.rewards + check_gamma(gamma) * (mdp.transitions @ Q.max(axis=1))


def greedy_policy(Q) -> np.ndarray:
    """Greedy actions; ties go to the lowest action index."""
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 2:
        raise ValueError("Q must be a (n_states, n_actions) array")
    return np.argmax(Q, axis=1).astype(np.int64)
