from vascnav.data.batching import Batch, assemble_inputs, one_hot
from vascnav.data.episodes import (Dataset, EpisodeRecord, TransitionView,
                                   episode_from_rollout, load_dataset,
                                   load_episode, save_episode)
from vascnav.data.replay import (PerState, init_per, sample_batch,
                                 sample_probabilities, update_weights)

__all__ = [
    "Batch",
    "Dataset",
    "EpisodeRecord",
    "PerState",
    "TransitionView",
    "assemble_inputs",
    "episode_from_rollout",
    "init_per",
    "load_dataset",
    "load_episode",
    "one_hot",
    "sample_batch",
    "sample_probabilities",
    "save_episode",
    "update_weights",
]
