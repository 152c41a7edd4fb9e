"""Loss functions and parameter-space updates for the actor-critic.

Critic objective on a sampled batch, with two Q heads and discount gamma:

    J(Q) = beta * E[ sum_i (y - Q_i(o, a))^2 ] + E[ V(o) - Q(o, a) ]
    y    = r + gamma * V(o') * (1 - done)        (constant, no gradient)
    V(o) = w * pi(o)^T Qbar(o) + (1 - w) * pi(o)^T Q(o)

where Q without a subscript is the elementwise min of the two heads and
Qbar is the same min over the target heads. The second term is a
discriminator: minimizing it pulls the policy-weighted value below the
value of the logged action, so out-of-distribution actions cannot look
better than the data. Gradients flow through the Q heads and the live
encoder only; pi, Qbar, and the TD target are constants here.

Actor objective (policy head only, encoder deliberately excluded):

    J(pi) = E[ -V(o) - alpha * H(pi(o)) ]

with Q constant, so the policy climbs the current value estimate while
the entropy bonus keeps it stochastic. `literal_actor_sign` flips the
entropy term for comparison runs. The temperature follows

    J(alpha) = E[ alpha * H(pi) - alpha * H_target ]

stepped in log space so alpha stays positive. Imitation pretraining
minimizes the negative log-likelihood of logged actions and is the only
loss whose policy gradient reaches the encoder.

Every loss accepts an optional `frozen` network set supplying the
constant paths (targets, pi weighting, constant Q terms). Production
passes frozen=None, which aliases the live networks: values are
identical and the constant subgraphs cost nothing extra at o. Gradient
checks pass a deepcopy so finite differences probe exactly the partial
derivative the analytic code claims to compute, with no leakage through
the stop-gradient paths.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from vascnav.agent.networks import (clipped_min, encode, encode_backward,
                                    head_backward, head_forward)
from vascnav.errors import require
from vascnav.nn.layers import log_softmax, softmax

LOG_PROB_FLOOR = -30.0   # NLL clamp; clamped rows contribute zero gradient


def compute_v(pi_row, q_row, q_bar_row, w):
    """Scalar V = w * pi^T q_bar + (1 - w) * pi^T q for one action row."""
    pi_row = np.asarray(pi_row, dtype=np.float64)
    q_row = np.asarray(q_row, dtype=np.float64)
    q_bar_row = np.asarray(q_bar_row, dtype=np.float64)
    return float(w * pi_row @ q_bar_row + (1.0 - w) * pi_row @ q_row)


def draw_shifts(alix, batch_size, rng):
    """One (dh, dw) smoothing shift per batch element.

    Drawn once per optimization step and shared by any frozen replay of
    the same forward pass, so live and constant paths see the same
    augmentation.
    """
    return rng.uniform(-alix.shift_range, alix.shift_range,
                       size=(batch_size, 2))


@dataclass
class CriticResult:
    loss: float
    grads: dict           # {"encoder": ..., "q1": ..., "q2": ...}
    abs_td: np.ndarray    # [B] |y - min_i Q_i(o,a)|, feeds replay weights
    g_shift: np.ndarray   # [B,C,h,w] gradient at the shift layer output


@dataclass
class ActorResult:
    loss: float
    grads: dict           # {"policy": ...}
    entropies: np.ndarray  # [B]


@dataclass
class ImitationResult:
    loss: float
    grads: dict           # {"encoder": ..., "policy": ...}
    n_clamped: int


def critic_loss(batch, nets, cfg, rng=None, shifts=None, frozen=None):
    """J(Q) with gradients for the encoder and both Q heads.

    The TD target, the pi(o) weighting, and the Qbar(o) term come from
    `frozen` (the live networks when None). Target-network passes run
    the smoothing layer in evaluation mode so targets are deterministic.
    """
    fz = frozen if frozen is not None else nets
    B = len(batch)
    if shifts is None:
        require(rng is not None, "critic_loss needs rng when shifts not given")
        shifts = draw_shifts(nets.alix, B, rng)
    idx = np.arange(B)
    act = batch.actions

    # Constant pieces. V(o') mixes target heads (on target-encoder
    # features) with online heads (on online-encoder features), both in
    # evaluation mode; done rows contribute no bootstrap.
    tfeat_n, _ = encode(fz.t_encoder, fz.alix, batch.next_images,
                        train_shift=False)
    nqb, _ = clipped_min(head_forward(fz.t_q1, tfeat_n, batch.next_prev)[0],
                         head_forward(fz.t_q2, tfeat_n, batch.next_prev)[0])
    ofeat_n, _ = encode(fz.encoder, fz.alix, batch.next_images,
                        train_shift=False)
    nq, _ = clipped_min(head_forward(fz.q1, ofeat_n, batch.next_prev)[0],
                        head_forward(fz.q2, ofeat_n, batch.next_prev)[0])
    npi = softmax(head_forward(fz.policy, ofeat_n, batch.next_prev)[0])
    v_next = (cfg.w * (npi * nqb).sum(axis=1)
              + (1.0 - cfg.w) * (npi * nq).sum(axis=1))
    y = batch.rewards + cfg.gamma * v_next * (1.0 - batch.dones)

    tfeat_c, _ = encode(fz.t_encoder, fz.alix, batch.cur_images,
                        train_shift=False)
    qbar, _ = clipped_min(head_forward(fz.t_q1, tfeat_c, batch.cur_prev)[0],
                          head_forward(fz.t_q2, tfeat_c, batch.cur_prev)[0])

    # Live pass, training-mode shifts.
    feat, enc_cache = encode(nets.encoder, nets.alix, batch.cur_images,
                             shifts=shifts, train_shift=True)
    q1, c_q1 = head_forward(nets.q1, feat, batch.cur_prev)
    q2, c_q2 = head_forward(nets.q2, feat, batch.cur_prev)
    qmin, take1 = clipped_min(q1, q2)

    if fz is nets:
        feat_c = feat
    else:
        feat_c, _ = encode(fz.encoder, fz.alix, batch.cur_images,
                           shifts=shifts, train_shift=True)
    pi_c = softmax(head_forward(fz.policy, feat_c, batch.cur_prev)[0])

    q1_a = q1[idx, act]
    q2_a = q2[idx, act]
    qmin_a = qmin[idx, act]
    v_cur = (cfg.w * (pi_c * qbar).sum(axis=1)
             + (1.0 - cfg.w) * (pi_c * qmin).sum(axis=1))

    j_td = cfg.beta * float(np.mean((y - q1_a) ** 2 + (y - q2_a) ** 2))
    j_disc = float(np.mean(v_cur - qmin_a))
    loss = j_td + j_disc

    # d loss / d qmin, then routed to whichever head holds the min.
    g_min = (1.0 - cfg.w) * pi_c / B
    g_min[idx, act] -= 1.0 / B
    gq1 = np.where(take1, g_min, 0.0)
    gq2 = np.where(take1, 0.0, g_min)
    gq1[idx, act] += cfg.beta * 2.0 * (q1_a - y) / B
    gq2[idx, act] += cfg.beta * 2.0 * (q2_a - y) / B

    grads_q1, gfeat1 = head_backward(gq1, c_q1)
    grads_q2, gfeat2 = head_backward(gq2, c_q2)
    grads_enc, g_shift = encode_backward(gfeat1 + gfeat2, enc_cache)
    return CriticResult(
        loss=loss,
        grads={"encoder": grads_enc, "q1": grads_q1, "q2": grads_q2},
        abs_td=np.abs(y - qmin_a),
        g_shift=g_shift,
    )


def actor_loss(batch, nets, cfg, alpha, rng=None, shifts=None, frozen=None):
    """J(pi) with gradients for the policy head only.

    The value weighting c = w * Qbar(o) + (1 - w) * Q(o) is constant.
    The feature gradient out of the policy head is discarded rather than
    pushed into the encoder: representation learning is the critic's and
    the imitation loss's job.
    """
    fz = frozen if frozen is not None else nets
    B = len(batch)
    if shifts is None:
        require(rng is not None, "actor_loss needs rng when shifts not given")
        shifts = draw_shifts(nets.alix, B, rng)
    feat, _ = encode(nets.encoder, nets.alix, batch.cur_images,
                     shifts=shifts, train_shift=True)
    logits, cache = head_forward(nets.policy, feat, batch.cur_prev)
    logp = log_softmax(logits)
    pi = np.exp(logp)

    if fz is nets:
        feat_c = feat
    else:
        feat_c, _ = encode(fz.encoder, fz.alix, batch.cur_images,
                           shifts=shifts, train_shift=True)
    qmin, _ = clipped_min(head_forward(fz.q1, feat_c, batch.cur_prev)[0],
                          head_forward(fz.q2, feat_c, batch.cur_prev)[0])
    tfeat, _ = encode(fz.t_encoder, fz.alix, batch.cur_images,
                      train_shift=False)
    qbar, _ = clipped_min(head_forward(fz.t_q1, tfeat, batch.cur_prev)[0],
                          head_forward(fz.t_q2, tfeat, batch.cur_prev)[0])
    c = cfg.w * qbar + (1.0 - cfg.w) * qmin

    v = (pi * c).sum(axis=1)
    ent = -(pi * logp).sum(axis=1)
    if cfg.literal_actor_sign:
        loss = float(np.mean(alpha * ent - v))
        dj_dpi = (-c - alpha * (logp + 1.0)) / B
    else:
        loss = float(np.mean(-v - alpha * ent))
        dj_dpi = (-c + alpha * (logp + 1.0)) / B

    # Softmax jacobian: dJ/dz_j = pi_j * (g_j - pi^T g) per row.
    glogits = pi * (dj_dpi - (pi * dj_dpi).sum(axis=1, keepdims=True))
    grads_pol, _gfeat = head_backward(glogits, cache)
    return ActorResult(loss=loss, grads={"policy": grads_pol}, entropies=ent)


def imitation_loss(batch, nets, rng=None, shifts=None):
    """Negative log-likelihood of logged actions, gradients to policy
    head and encoder.

    Rows whose action log-probability falls below LOG_PROB_FLOOR are
    clamped into the loss value and dropped from the gradient, and the
    count is reported: a collapsed probability means the data conflicts
    with itself or the policy head has diverged.
    """
    B = len(batch)
    if shifts is None:
        require(rng is not None,
                "imitation_loss needs rng when shifts not given")
        shifts = draw_shifts(nets.alix, B, rng)
    idx = np.arange(B)
    feat, enc_cache = encode(nets.encoder, nets.alix, batch.cur_images,
                             shifts=shifts, train_shift=True)
    logits, cache = head_forward(nets.policy, feat, batch.cur_prev)
    logp = log_softmax(logits)
    lp_a = logp[idx, batch.actions]
    clamped = lp_a < LOG_PROB_FLOOR
    loss = float(-np.mean(np.maximum(lp_a, LOG_PROB_FLOOR)))

    glogits = np.exp(logp)
    glogits[idx, batch.actions] -= 1.0
    glogits /= B
    glogits[clamped] = 0.0
    n_clamped = int(clamped.sum())
    if n_clamped:
        warnings.warn(
            f"imitation loss clamped {n_clamped} action log-probabilities "
            f"at {LOG_PROB_FLOOR}", RuntimeWarning, stacklevel=2)
    grads_pol, gfeat = head_backward(glogits, cache)
    grads_enc, _ = encode_backward(gfeat, enc_cache)
    return ImitationResult(loss=loss,
                           grads={"encoder": grads_enc, "policy": grads_pol},
                           n_clamped=n_clamped)


def update_alpha(log_alpha, entropies, cfg):
    """One gradient step on log alpha against the entropy target.

    J(alpha) = alpha * (mean H - H_target), d/dlog_alpha = alpha * (...),
    so alpha shrinks while the policy is more random than the target and
    grows when it is less. Returns the new log alpha.
    """
    alpha = float(np.exp(log_alpha))
    gap = float(np.mean(entropies)) - cfg.target_entropy
    return float(log_alpha - cfg.lr_alpha * alpha * gap)


def update_target(nets, rate):
    """EMA the online parameters into the target copies, in place."""
    require(0.0 < rate <= 1.0, f"target ema rate {rate} outside (0, 1]")
    for tgt, src in nets.target_groups().values():
        for k in tgt:
            tgt[k] *= 1.0 - rate
            tgt[k] += rate * src[k]


def clip_critic_norm(nets, bound):
    """Rescale each Q head so its full parameter vector has l2 norm
    <= bound. The encoder is shared with the policy path and is left
    alone. Returns the pre-clip norms (q1, q2) for logging.
    """
    norms = []
    for params in (nets.q1, nets.q2):
        total = float(np.sqrt(sum(float((p * p).sum())
                                  for p in params.values())))
        norms.append(total)
        # the relative slack keeps repeated application a bitwise no-op
        # after one rescale lands within rounding of the bound
        if total > bound * (1.0 + 1e-12):
            scale = bound / total
            for p in params.values():
                p *= scale
    return tuple(norms)
