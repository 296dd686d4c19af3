"""Benchmark MDP families."""
from __future__ import annotations

import numpy as np

from .mdp import TabularMdp

GARNET_CYCLE_MASS = 0.05
RIVER_SWIM_RIGHT = (0.3, 0.6, 0.1)  # forward, stay, slip back
RIVER_SWIM_LEFT_REWARD = 0.005


def gen_cycle(n_states: int) -> TabularMdp:
    """Single-action deterministic cycle ``s -> s + 1 mod n`` paying 1 at state ``n - 1``.

    The optimal gain is ``1 / n``.
    """
    n = int(n_states)
    if n < 1:
        raise ValueError("cycle needs at least one state")
    P = np.zeros((n, 1, n))
    P[np.arange(n), 0, (np.arange(n) + 1) % n] = 1.0
    r = np.zeros((n, 1))
    r[n - 1, 0] = 1.0
    return TabularMdp(P, r, name=f"cycle-{n}")


def gen_river_swim(n_states: int) -> TabularMdp:
    """RiverSwim chain with actions left (0) and right (1).

    Left always moves one state left (staying put at the left end). Right
    moves forward w.p. 0.3, stays w.p. 0.6 and slips back w.p. 0.1; at either
    end the mass that would leave the chain stays in place.
    """
    n = int(n_states)
    if n < 2:
        raise ValueError("river swim needs at least two states")
    fwd, stay, back = RIVER_SWIM_RIGHT
    P = np.zeros((n, 2, n))
    for s in range(n):
        P[s, 0, max(s - 1, 0)] = 1.0
        P[s, 1, min(s + 1, n - 1)] += fwd
        P[s, 1, s] += stay
        P[s, 1, max(s - 1, 0)] += back
    r = np.zeros((n, 2))
    r[0, 0] = RIVER_SWIM_LEFT_REWARD
    r[n - 1, 1] = 1.0
    return TabularMdp(P, r, name=f"riverswim-{n}")


def gen_garnet(n_states: int, n_actions: int, branching: int, seed: int) -> TabularMdp:
    """Random Garnet MDP with a blended action-0 cycle.

    Every (s, a) row puts normalised uniform weights on ``branching``
    distinct next states; rewards are iid uniform on [0, 1]. Action-0 rows
    then move 5% of their mass onto ``s + 1 mod n``, so the always-0 policy
    visits every state and the MDP is communicating.
    """
    n, k, b = int(n_states), int(n_actions), int(branching)
    if n < 1 or k < 1:
        raise ValueError("garnet needs at least one state and one action")
    if not 1 <= b <= n:
        raise ValueError(f"branching must lie in [1, {n}], got {b}")
    rng = np.random.default_rng(seed)
    P = np.zeros((n, k, n))
    for s in range(n):
        for a in range(k):
            support = rng.choice(n, size=b, replace=False)
            w = rng.uniform(size=b) + np.finfo(float).tiny
            P[s, a, support] = w / w.sum()
    r = rng.uniform(size=(n, k))
    P[:, 0, :] *= 1.0 - GARNET_CYCLE_MASS
    P[np.arange(n), 0, (np.arange(n) + 1) % n] += GARNET_CYCLE_MASS
    return TabularMdp(P, r, name=f"garnet-{n}-{k}-{b}-{seed}")
