"""Behavior cloning baseline: negative log likelihood on successful
episodes only, with a held-out split for snapshot selection.

Failed episodes are excluded because cloning them reproduces their
failures; the RL trainer keeps them since the critic extracts value
from negative outcomes too. Transitions from the kept episodes are
shuffled once and split 4:1; the returned networks are the encoder and
policy snapshot with the best held-out likelihood, which guards
against late-run overfitting on small demo sets.
"""

import copy

import numpy as np

from vascnav.agent.losses import imitation_loss
from vascnav.agent.networks import init_networks
from vascnav.data.batching import assemble_inputs
from vascnav.errors import DataFormatError
from vascnav.nn.adam import AdamState, adam_step


def _split(dataset, rng):
    views = [v for v in dataset.views if v.record.success]
    if not views:
        raise DataFormatError("no successful episodes to clone")
    order = rng.permutation(len(views))
    cut = max(1, int(round(len(views) * 0.8)))
    if cut == len(views):
        cut = len(views) - 1  # keep at least one held-out transition
    train = [views[i] for i in order[:cut]]
    held = [views[i] for i in order[cut:]]
    return train, held


def _held_out_nll(views, nets, batch=256):
    total = 0.0
    for lo in range(0, len(views), batch):
        chunk = views[lo:lo + batch]
        b = assemble_inputs(chunk)
        res = imitation_loss(b, nets, shifts=np.zeros((len(b), 2)))
        total += res.loss * len(chunk)
    return total / len(views)


def bc_train(dataset, config, lr_policy=1e-3, lr_encoder=2e-4,
             eval_every=250, progress=None):
    """Trains a fresh encoder + policy by direct action cloning.

    Runs config.pretrain_steps gradient steps at config.batch_size with
    learning rates tuned for pure cloning rather than the joint
    pretraining schedule. Returns (nets, history) where history is the
    list of (step, train_nll, held_out_nll) evaluation points.
    """
    rng = np.random.default_rng(config.seed)
    train, held = _split(dataset, rng)
    h, w = dataset.records[0].vessel.shape
    nets = init_networks(h, w, rng, shift_init=config.shift_init,
                         shift_max=config.shift_max)
    adam = {"policy": AdamState(lr=lr_policy),
            "encoder": AdamState(lr=lr_encoder)}

    best_nll = np.inf
    best = None
    history = []
    for step in range(1, config.pretrain_steps + 1):
        idxs = rng.integers(0, len(train), size=config.batch_size)
        b = assemble_inputs([train[i] for i in idxs])
        res = imitation_loss(b, nets, rng=rng)
        adam_step(nets.policy, res.grads["policy"], adam["policy"])
        adam_step(nets.encoder, res.grads["encoder"], adam["encoder"])
        if step % eval_every == 0 or step == config.pretrain_steps:
            nll = _held_out_nll(held, nets)
            history.append((step, res.loss, nll))
            if nll < best_nll:
                best_nll = nll
                best = (copy.deepcopy(nets.encoder),
                        copy.deepcopy(nets.policy))
            if progress is not None:
                progress(step, res.loss, nll)

    if best is not None:
        nets.encoder, nets.policy = best
        # online heads moved under the frozen targets; re-tie for any
        # later use of the target stack
        for tgt, src in nets.target_groups().values():
            for key in tgt:
                tgt[key] = src[key].copy()
    return nets, history
