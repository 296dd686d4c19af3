import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from anchored_vi.mdp import TabularMdp

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_mdp(rng, n_states, n_actions, sparsity=0.5, deterministic=False):
    """Random valid MDP; rows are point masses when ``deterministic``."""
    P = np.zeros((n_states, n_actions, n_states))
    for s in range(n_states):
        for a in range(n_actions):
            if deterministic:
                P[s, a, rng.integers(n_states)] = 1.0
                continue
            w = rng.uniform(size=n_states) * (rng.uniform(size=n_states) >= sparsity)
            w[rng.integers(n_states)] += 0.1
            P[s, a] = w / w.sum()
    r = rng.uniform(size=(n_states, n_actions))
    return TabularMdp(P, r)


@st.composite
def mdps(draw, max_states=5, max_actions=3, deterministic=False):
    n = draw(st.integers(1, max_states))
    k = draw(st.integers(1, max_actions))
    seed = draw(st.integers(0, 2**32 - 1))
    sparsity = draw(st.sampled_from([0.0, 0.5, 0.8]))
    return random_mdp(np.random.default_rng(seed), n, k, sparsity, deterministic)


@pytest.fixture
def swap_mdp():
    """Two states, two actions: action 0 self-loops with reward 0, action 1 swaps with reward 1."""
    P = np.zeros((2, 2, 2))
    P[0, 0, 0] = P[1, 0, 1] = 1.0
    P[0, 1, 1] = P[1, 1, 0] = 1.0
    r = np.array([[0.0, 1.0], [0.0, 1.0]])
    return TabularMdp(P, r, name="swap")


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
