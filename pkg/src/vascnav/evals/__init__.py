"""Policy evaluation rollouts and TD-error diagnostics."""

from vascnav.evals.diagnostics import (save_td_map_pgm, td_error_curves,
                                       td_error_map, transition_td)
from vascnav.evals.harness import (EpisodeRow, EvalReport, evaluate_policy,
                                   is_backward, policy_probabilities,
                                   run_episode, score_trajectory)

__all__ = [
    "EpisodeRow", "EvalReport", "evaluate_policy", "is_backward",
    "policy_probabilities", "run_episode", "save_td_map_pgm",
    "score_trajectory", "td_error_curves", "td_error_map", "transition_td",
]
