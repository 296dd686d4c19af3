"""Anchored stochastic value iteration for tabular MDPs."""

from .average import (SaviaParams, exact_savia, savia, savia_plus, savia_plus_eps_optimal,
                      savia_plus_eps_optimal_expected)
from .discounted import SavidParams, savid, savid_fixed_horizon, savid_plus, savid_plus_eps_optimal
from .generative import GenerativeModel
from .generators import gen_cycle, gen_garnet, gen_river_swim
from .mdp import TabularMdp
from .mdpfile import read_mdp, write_mdp
from .oracles import (discounted_policy_q, discounted_vi, exact_anchored_vi, monte_carlo_gain,
                      policy_gain)

__all__ = [
    "GenerativeModel", "SaviaParams", "SavidParams", "TabularMdp",
    "discounted_policy_q", "discounted_vi", "exact_anchored_vi", "exact_savia",
    "gen_cycle", "gen_garnet", "gen_river_swim", "monte_carlo_gain", "policy_gain",
    "read_mdp", "savia", "savia_plus", "savia_plus_eps_optimal", "savia_plus_eps_optimal_expected",
    "savid", "savid_fixed_horizon", "savid_plus", "savid_plus_eps_optimal", "write_mdp",
]
