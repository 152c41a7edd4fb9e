"""Actor-critic agent: networks, losses, and training loops."""

from vascnav.agent.bc import bc_train
from vascnav.agent.checkpoint import load_checkpoint, save_checkpoint
from vascnav.agent.config import (TrainerConfig, desk_trainer_config,
                                  dump_trainer_config, load_trainer_config)
from vascnav.agent.losses import (ActorResult, CriticResult, ImitationResult,
                                  actor_loss, clip_critic_norm, compute_v,
                                  critic_loss, draw_shifts, imitation_loss,
                                  update_alpha, update_target)
from vascnav.agent.networks import (CONTEXT_DIM, FEATURE_DIM, N_SELECTABLE,
                                    Networks, clipped_min, encode,
                                    encode_backward, forward_heads,
                                    head_backward, head_forward, init_encoder,
                                    init_head, init_networks, orthogonal)
from vascnav.agent.trainer import (METRICS_HEADER, StepMetrics, TrainerState,
                                   init_trainer, pretrain_loop, pretrain_step,
                                   rl_step, train_loop)

__all__ = [
    "ActorResult", "CONTEXT_DIM", "CriticResult", "FEATURE_DIM",
    "ImitationResult", "METRICS_HEADER", "N_SELECTABLE", "Networks",
    "StepMetrics", "TrainerConfig", "TrainerState", "actor_loss", "bc_train",
    "clip_critic_norm", "clipped_min", "compute_v", "critic_loss",
    "desk_trainer_config", "draw_shifts", "dump_trainer_config", "encode",
    "encode_backward", "forward_heads", "head_backward", "head_forward",
    "imitation_loss", "init_encoder", "init_head", "init_networks",
    "init_trainer", "load_checkpoint", "load_trainer_config", "orthogonal",
    "pretrain_loop", "pretrain_step", "rl_step", "save_checkpoint",
    "train_loop", "update_alpha", "update_target",
]
