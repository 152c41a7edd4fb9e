"""Training loops: imitation pretraining followed by offline RL.

Both loops share one mutable TrainerState and one master random stream,
so a (seed, dataset, config) triple fixes every sampled batch and every
smoothing shift, and two runs produce bit-identical metrics files.

Pretraining order per step: sample a batch (weights frozen at their
init value, so sampling is uniform-by-value), imitation gradients,
critic gradients, one Adam step per parameter group with the two
encoder gradients summed, critic norm clip, target update. The entropy
temperature, the shift range, and the replay weights all stay frozen;
the shift layer itself stays stochastically active.

RL order per step: sample; actor step; critic step plus norm clip;
temperature step on the batch entropies; shift-range step on the batch
mean discontinuity score of the critic gradient at the shift layer
output; target update; replay weight update with the step's TD
magnitudes.

Metrics rows are written for every step as
  step,J_Q,J_pi,alpha,S,mean_ND,mean_abs_TD
with repr() of python floats (full precision, parseable back exactly).
The J_pi column carries the imitation loss during pretraining.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from vascnav.agent.config import TrainerConfig
from vascnav.agent.losses import (actor_loss, clip_critic_norm, critic_loss,
                                  imitation_loss, update_alpha, update_target)
from vascnav.agent.networks import init_networks
from vascnav.data.batching import assemble_inputs
from vascnav.data.replay import init_per, sample_batch, update_weights
from vascnav.errors import ContractViolation, require
from vascnav.nn.adam import AdamState, adam_step
from vascnav.smoothing import nd_score, update_shift_range

METRICS_HEADER = "step,J_Q,J_pi,alpha,S,mean_ND,mean_abs_TD"


@dataclass
class TrainerState:
    """Everything mutable about a run besides the network parameters."""

    log_alpha: float
    adam: dict              # group name -> AdamState
    per: object             # PerState over dataset transitions
    rng: np.random.Generator
    pretrain_step: int = 0
    rl_step: int = 0

    @property
    def alpha(self):
        return float(np.exp(self.log_alpha))


@dataclass
class StepMetrics:
    step: int
    j_q: float
    j_pi: float
    alpha: float
    s: float
    mean_nd: float
    mean_abs_td: float

    def row(self):
        return ",".join([str(self.step)] + [
            repr(float(x)) for x in (self.j_q, self.j_pi, self.alpha,
                                     self.s, self.mean_nd, self.mean_abs_td)])


def init_trainer(dataset, config):
    """Fresh networks and trainer state for a dataset's raster size."""
    h, w = dataset.records[0].vessel.shape
    rng = np.random.default_rng(config.seed)
    nets = init_networks(h, w, rng, shift_init=config.shift_init,
                         shift_max=config.shift_max)
    adam = {
        "encoder": AdamState(lr=config.lr_encoder),
        "policy": AdamState(lr=config.lr_actor),
        "q1": AdamState(lr=config.lr_critic),
        "q2": AdamState(lr=config.lr_critic),
    }
    per = init_per(len(dataset), tau=config.tau, k=config.k,
                   eps1=config.eps1, eps2=config.eps2)
    per.frozen = True  # pretraining contract; train_loop unfreezes
    state = TrainerState(log_alpha=float(np.log(config.alpha_init)),
                         adam=adam, per=per, rng=rng)
    return nets, state


def _sample(dataset, config, state):
    idxs = sample_batch(state.per, config.batch_size, state.rng)
    batch = assemble_inputs([dataset.views[i] for i in idxs])
    return idxs, batch


def _loss_shift_args(nets, config, state, batch_size):
    # with the smoothing layer disabled the loss passes see exact zero
    # shifts (an identity layer) and the master stream is not consumed
    if config.alix_enabled:
        return {"rng": state.rng}
    return {"shifts": np.zeros((batch_size, 2))}


def _abort_if_nan(losses, step_name, step, idxs, nets, state, config,
                  out_dir):
    bad = {name: val for name, val in losses.items()
           if not np.isfinite(val)}
    if not bad:
        return
    path = None
    if out_dir is not None:
        from vascnav.agent.checkpoint import save_checkpoint
        path = os.path.join(out_dir, f"abort_{step_name}_{step}.ckpt")
        save_checkpoint(path, nets, state, config)
    raise ContractViolation(
        f"non-finite loss at {step_name} step {step}: {bad}; "
        f"batch indices {sorted(set(int(i) for i in idxs))}"
        + (f"; last good parameters saved to {path}" if path else ""))


def pretrain_step(dataset, nets, config, state, out_dir=None):
    """One imitation + critic step. Returns StepMetrics."""
    idxs, batch = _sample(dataset, config, state)
    kw = _loss_shift_args(nets, config, state, len(batch))
    im = imitation_loss(batch, nets, **kw)
    kw = _loss_shift_args(nets, config, state, len(batch))
    cr = critic_loss(batch, nets, config, **kw)
    _abort_if_nan({"J_im": im.loss, "J_Q": cr.loss}, "pretrain",
                  state.pretrain_step, idxs, nets, state, config, out_dir)

    enc = {k: im.grads["encoder"][k] + cr.grads["encoder"][k]
           for k in nets.encoder}
    adam_step(nets.encoder, enc, state.adam["encoder"])
    adam_step(nets.policy, im.grads["policy"], state.adam["policy"])
    adam_step(nets.q1, cr.grads["q1"], state.adam["q1"])
    adam_step(nets.q2, cr.grads["q2"], state.adam["q2"])
    clip_critic_norm(nets, config.l2_bound)
    update_target(nets, config.target_ema)
    state.pretrain_step += 1
    return StepMetrics(
        step=state.pretrain_step, j_q=cr.loss, j_pi=im.loss,
        alpha=state.alpha, s=nets.alix.shift_range,
        mean_nd=nd_score(cr.g_shift),
        mean_abs_td=float(cr.abs_td.mean()))


def rl_step(dataset, nets, config, state, out_dir=None):
    """One offline actor-critic step. Returns StepMetrics."""
    idxs, batch = _sample(dataset, config, state)
    kw = _loss_shift_args(nets, config, state, len(batch))
    ac = actor_loss(batch, nets, config, state.alpha, **kw)
    kw = _loss_shift_args(nets, config, state, len(batch))
    cr = critic_loss(batch, nets, config, **kw)
    _abort_if_nan({"J_pi": ac.loss, "J_Q": cr.loss}, "rl",
                  state.rl_step, idxs, nets, state, config, out_dir)

    adam_step(nets.policy, ac.grads["policy"], state.adam["policy"])
    adam_step(nets.encoder, cr.grads["encoder"], state.adam["encoder"])
    adam_step(nets.q1, cr.grads["q1"], state.adam["q1"])
    adam_step(nets.q2, cr.grads["q2"], state.adam["q2"])
    clip_critic_norm(nets, config.l2_bound)
    state.log_alpha = update_alpha(state.log_alpha, ac.entropies, config)
    mean_nd = nd_score(cr.g_shift)
    if config.alix_enabled:
        update_shift_range(nets.alix, mean_nd, config.nd_target,
                           config.lr_shift)
    update_target(nets, config.target_ema)
    update_weights(state.per, idxs, cr.abs_td)
    state.rl_step += 1
    return StepMetrics(
        step=state.rl_step, j_q=cr.loss, j_pi=ac.loss, alpha=state.alpha,
        s=nets.alix.shift_range, mean_nd=mean_nd,
        mean_abs_td=float(cr.abs_td.mean()))


class _MetricsWriter:
    def __init__(self, out_dir, name, resume):
        self.fh = None
        if out_dir is None:
            return
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, name)
        if resume and os.path.exists(path):
            self.fh = open(path, "a")
        else:
            self.fh = open(path, "w")
            self.fh.write(METRICS_HEADER + "\n")

    def write(self, metrics):
        if self.fh is not None:
            self.fh.write(metrics.row() + "\n")

    def close(self):
        if self.fh is not None:
            self.fh.close()


def pretrain_loop(dataset, config, out_dir=None, progress=None):
    """Run imitation pretraining from scratch. Returns (nets, state).

    The replay weights stay at their init value throughout (checked
    after the loop); the returned state still has them frozen, and
    train_loop unfreezes on entry.
    """
    nets, state = init_trainer(dataset, config)
    writer = _MetricsWriter(out_dir, "pretrain_metrics.csv", resume=False)
    try:
        while state.pretrain_step < config.pretrain_steps:
            m = pretrain_step(dataset, nets, config, state, out_dir)
            writer.write(m)
            if progress is not None:
                progress(m)
    finally:
        writer.close()
    require(bool(np.all(state.per.f == config.eps2)),
            "replay weights moved during pretraining")
    if out_dir is not None:
        from vascnav.agent.checkpoint import save_checkpoint
        save_checkpoint(os.path.join(out_dir, "pretrained.ckpt"),
                        nets, state, config)
    return nets, state


def train_loop(dataset, config, pretrained=None, out_dir=None,
               progress=None):
    """Run the offline RL phase. Returns (nets, state).

    pretrained is the (nets, state) pair from pretrain_loop or a loaded
    checkpoint; None starts from freshly initialized networks (the
    no-pretraining ablation). A state whose rl counter is mid-run
    continues where it left off and appends to the metrics file.
    """
    if pretrained is None:
        nets, state = init_trainer(dataset, config)
    else:
        nets, state = pretrained
    state.per.frozen = False
    resume = state.rl_step > 0
    writer = _MetricsWriter(out_dir, "rl_metrics.csv", resume=resume)
    try:
        while state.rl_step < config.rl_steps:
            m = rl_step(dataset, nets, config, state, out_dir)
            writer.write(m)
            if progress is not None:
                progress(m)
    finally:
        writer.close()
    if out_dir is not None:
        from vascnav.agent.checkpoint import save_checkpoint
        save_checkpoint(os.path.join(out_dir, "final.ckpt"),
                        nets, state, config)
    return nets, state
