"""Efficiency and fairness of a shared battery fed by Markov-modulated users."""

from .analysis import chunked_bound, compute_llr_e, decay_rate, price_of_fairness, sweep, theorem1_bound
from .cmdp import allowed_actions, build_instance, efficient_actions, transition_step
from .lpcore import LinearProgram, solve_lp
from .netgen import UserModel, build_joint_chain, drifts, generation_probability, stationary_distribution
from .policy import exact_evaluate, extract_policy, greedy_efficient_policy, single_user_greedy_evaluate
from .programs import build_lp_f, build_lp_p, occupation_marginals, solve_f, solve_p
from .sim import simulate_policy

__version__ = "0.1.0"

__all__ = [
    "LinearProgram", "UserModel", "allowed_actions", "build_instance", "build_joint_chain", "build_lp_f",
    "build_lp_p", "chunked_bound", "compute_llr_e", "decay_rate", "drifts", "efficient_actions",
    "exact_evaluate", "extract_policy", "generation_probability", "greedy_efficient_policy",
    "occupation_marginals", "price_of_fairness", "simulate_policy", "single_user_greedy_evaluate",
    "solve_f", "solve_lp", "solve_p", "stationary_distribution", "sweep", "theorem1_bound",
    "transition_step",
]
