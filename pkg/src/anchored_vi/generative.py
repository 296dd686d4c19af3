"""Simulated generative-model access to a tabular MDP.

Every next-state draw belongs to a substream keyed by
``(master_seed, state, action, iteration, loop)`` and is addressed by its
draw index inside that substream. Outputs therefore depend only on the
seed and the keys, never on thread count or evaluation order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _pykernels, kernels
from .kernels import MASK64, sampling_cdf, stream_key
from .mdp import TabularMdp

SAMPLERS = ("draws", "multinomial")


@dataclass(frozen=True)
class SampleStreamKey:
    state: int
    action: int
    iteration: int = 0
    loop: int = 0


def _stream_keys(master_seed, n_states, n_actions, iteration, loop):
    """Vectorised ``stream_key`` for every (s, a) pair, row-major."""
    s = np.repeat(np.arange(n_states, dtype=np.uint64), n_actions)
    a = np.tile(np.arange(n_actions, dtype=np.uint64), n_states)
    g = _pykernels.GOLDEN
    with np.errstate(over="ignore"):
        h = np.full(s.shape, stream_key(master_seed), dtype=np.uint64)
        for x in (s, a, np.uint64(iteration), np.uint64(loop)):
            h = _pykernels._mix(h ^ (x * g + g))
    return h


class GenerativeModel:
    """Seeded sampler over a :class:`TabularMdp` with an exact draw counter.

    Solvers only see ``n_states``, ``n_actions``, ``rewards`` and the
    sampling methods; the transition tensor stays private.

    ``sampler="draws"`` draws each next state by inverse-CDF search (the
    compiled kernel when available). ``sampler="multinomial"`` draws the
    per-row next-state counts of a batch in one multinomial sample, which is
    the same distribution at O(n_states) cost per row regardless of the batch
    size; it is meant for very large batches.
    """

    def __init__(self, mdp: TabularMdp, master_seed: int = 0, *, sampler: str = "draws",
                 threads: int = 1, backend=None):
        if sampler not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}")
        if not 0 <= int(master_seed) <= MASK64:
            raise ValueError("master_seed must fit in 64 unsigned bits")
        self._mdp = mdp
        self.master_seed = int(master_seed)
        self.sampler = sampler
        self.threads = max(1, int(threads))
        self._kern = kernels if backend is None else kernels.get_backend(backend)
        n, k = mdp.n_states, mdp.n_actions
        rows = mdp.transitions.reshape(n * k, n)
        self._rows = rows
        self._cdf = sampling_cdf(rows)
        support = rows > 0
        single = support.sum(axis=1) == 1
        self._point = np.where(single, np.argmax(support, axis=1), -1)
        self._random_rows = np.flatnonzero(~single)
        self.sample_count = 0

    @property
    def n_states(self) -> int:
        return self._mdp.n_states

    @property
    def n_actions(self) -> int:
        return self._mdp.n_actions

    @property
    def rewards(self) -> np.ndarray:
        return self._mdp.rewards

    def total_samples(self) -> int:
        return self.sample_count

    def reset(self) -> None:
        self.sample_count = 0

    def _count(self, n):
        total = self.sample_count + n
        if total > MASK64:
            raise OverflowError("sample counter exceeded 64 bits")
        self.sample_count = total

    def key(self, key: SampleStreamKey) -> int:
        return stream_key(self.master_seed, key.state, key.action, key.iteration, key.loop)

    def next_state(self, key: SampleStreamKey, j: int) -> int:
        """Draw ``j`` of the substream ``key``."""
        s, a = key.state, key.action
        if not (0 <= s < self.n_states and 0 <= a < self.n_actions):
            raise IndexError(f"invalid state-action pair ({s}, {a})")
        if not 0 <= j <= MASK64:
            raise IndexError("draw index out of range")
        row = s * self.n_actions + a
        self._count(1)
        if self._point[row] >= 0:
            return int(self._point[row])
        return int(self._kern.draw_states(self._cdf[row], np.uint64(self.key(key)), np.uint64(j), 1)[0])

    def next_state_counts(self, m: int, iteration: int = 0, loop: int = 0) -> np.ndarray:
        """Next-state counts of ``m`` draws for every (s, a); shape (S*A, S)."""
        m = int(m)
        if m < 1:
            raise ValueError("batch size m must be >= 1")
        n, k = self.n_states, self.n_actions
        self._count(n * k * m)
        counts = np.zeros((n * k, n), dtype=np.int64)
        point = np.flatnonzero(self._point >= 0)
        counts[point, self._point[point]] = m
        rows = self._random_rows
        if rows.size == 0:
            return counts
        keys = _stream_keys(self.master_seed, n, k, iteration, loop)[rows]
        if self.sampler == "draws":
            sub = np.zeros((rows.size, n), dtype=np.int64)
            self._kern.draw_counts(self._cdf[rows], np.ascontiguousarray(keys), m, sub, self.threads)
            counts[rows] = sub
        else:
            for row, key in zip(rows, keys):
                rng = np.random.Generator(np.random.Philox(key=int(key)))
                counts[row] = rng.multinomial(m, self._rows[row])
        return counts

    def sample_matrix(self, d, m: int, iteration: int = 0, loop: int = 0) -> np.ndarray:
        """``D(s, a)``: mean of ``d`` over ``m`` next-state draws from every (s, a).

        Consumes ``n_states * n_actions * m`` samples. The result is clipped
        to ``[min d, max d]`` to absorb last-ulp rounding, so ``span(D) <=
        span(d)`` and ``|D| <= |d|`` hold exactly.
        """
        d = np.asarray(d, dtype=np.float64)
        if d.shape != (self.n_states,):
            raise ValueError(f"d must have shape ({self.n_states},)")
        counts = self.next_state_counts(m, iteration, loop)
        D = (counts * d).sum(axis=1) / m
        np.clip(D, d.min(), d.max(), out=D)
        point = np.flatnonzero(self._point >= 0)
        D[point] = d[self._point[point]]
        return D.reshape(self.n_states, self.n_actions)

    def trajectory_visits(self, policy, start: int, horizon: int, seed: int) -> np.ndarray:
        """State visit counts of one ``horizon``-step run of ``policy`` from ``start``."""
        pi = np.asarray(policy, dtype=np.int64)
        rows = np.arange(self.n_states) * self.n_actions + pi
        cdf = np.ascontiguousarray(self._cdf[rows])
        visits = np.zeros(self.n_states, dtype=np.int64)
        key = stream_key(self.master_seed, 1 << 32, int(seed), int(start))
        self._kern.walk_visits(cdf, int(start), int(horizon), np.uint64(key), visits)
        self._count(max(int(horizon) - 1, 0))
        return visits
