"""Network assembly: shared conv encoder, policy head, twin Q heads, targets.

Encoder: 4 valid convs (16, 32, 32, 32 channels, 3x3, strides 2,2,1,1) with
ReLU, the stochastic shift layer on the last activation, flatten, linear to
256, ReLU. Heads are 2x256 MLPs over the 267-dim concatenation of features
and the previous-action one-hot. All parameters live in flat name->array
dicts; forward passes return explicit caches for the paired backwards.
"""

import copy
from dataclasses import dataclass

import numpy as np

from vascnav.errors import require
from vascnav.nn.layers import (conv2d_backward, conv2d_forward,
                               linear_backward, linear_forward, relu_backward,
                               relu_forward, softmax)
from vascnav.smoothing import AlixState, alix_backward, alix_forward

N_SELECTABLE = 10
CONTEXT_DIM = 11      # 10 selectable actions plus the start marker
FEATURE_DIM = 256
_CONV_PLAN = ((16, 2), (32, 2), (32, 1), (32, 1))  # (out channels, stride), 3x3


def orthogonal(shape, gain, rng, dtype=np.float64):
    """QR-based orthogonal init, rows orthonormal (or columns if wide)."""
    rows, cols = shape
    flat = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(flat)
    q *= np.sign(np.diag(r))  # fix the sign ambiguity for determinism
    if rows < cols:
        q = q.T
    # lapack hands back fortran-ordered factors; force C order so that
    # flat views used by optimizers and gradient checks alias the array
    return np.ascontiguousarray(gain * q[:rows, :cols], dtype=dtype)


def _conv_weight(o, c, k, gain, rng, dtype):
    return orthogonal((o, c * k * k), gain, rng, dtype).reshape(o, c, k, k)


def init_encoder(h, w, rng, dtype=np.float64):
    params = {}
    c_in, hh, ww = 3, h, w
    gain = np.sqrt(2.0)
    for i, (c_out, stride) in enumerate(_CONV_PLAN, start=1):
        params[f"c{i}w"] = _conv_weight(c_out, c_in, 3, gain, rng, dtype)
        params[f"c{i}b"] = np.zeros(c_out, dtype=dtype)
        hh = (hh - 3) // stride + 1
        ww = (ww - 3) // stride + 1
        c_in = c_out
    flat_dim = c_in * hh * ww
    params["fw"] = orthogonal((FEATURE_DIM, flat_dim), gain, rng, dtype)
    params["fb"] = np.zeros(FEATURE_DIM, dtype=dtype)
    return params


def init_head(out_dim, rng, dtype=np.float64):
    gain = np.sqrt(2.0)
    return {
        "h1w": orthogonal((256, FEATURE_DIM + CONTEXT_DIM), gain, rng, dtype),
        "h1b": np.zeros(256, dtype=dtype),
        "h2w": orthogonal((256, 256), gain, rng, dtype),
        "h2b": np.zeros(256, dtype=dtype),
        "ow": orthogonal((out_dim, 256), 1.0, rng, dtype),
        "ob": np.zeros(out_dim, dtype=dtype),
    }


@dataclass
class Networks:
    encoder: dict
    policy: dict
    q1: dict
    q2: dict
    t_encoder: dict
    t_q1: dict
    t_q2: dict
    alix: AlixState
    h: int
    w: int

    def param_groups(self):
        return {"encoder": self.encoder, "policy": self.policy,
                "q1": self.q1, "q2": self.q2}

    def target_groups(self):
        return {"encoder": (self.t_encoder, self.encoder),
                "q1": (self.t_q1, self.q1), "q2": (self.t_q2, self.q2)}


def init_networks(h, w, rng, shift_init=0.5, shift_max=1.0, dtype=np.float64):
    encoder = init_encoder(h, w, rng, dtype)
    policy = init_head(N_SELECTABLE, rng, dtype)
    q1 = init_head(N_SELECTABLE, rng, dtype)
    q2 = init_head(N_SELECTABLE, rng, dtype)
    return Networks(
        encoder=encoder, policy=policy, q1=q1, q2=q2,
        t_encoder=copy.deepcopy(encoder), t_q1=copy.deepcopy(q1),
        t_q2=copy.deepcopy(q2),
        alix=AlixState(shift_range=shift_init, s_max=shift_max),
        h=h, w=w)


# -- encoder ----------------------------------------------------------------


def encode(params, alix, images, rng=None, shifts=None, train_shift=True):
    """images [B,3,H,W] -> (features [B,256], cache).

    With train_shift the stochastic shift layer mixes the last conv
    activation (pass rng to draw offsets, or explicit shifts [B,2] to pin
    them); otherwise the layer is the identity, as at inference and on
    target-side passes.
    """
    require(images.ndim == 4 and images.shape[1] == 3,
            f"expected [B,3,H,W] images, got {images.shape}")
    x = images
    caches = []
    for i, (_, stride) in enumerate(_CONV_PLAN, start=1):
        y, c_conv = conv2d_forward(x, params[f"c{i}w"], params[f"c{i}b"], stride)
        x, mask = relu_forward(y)
        caches.append((c_conv, mask))
    if train_shift:
        if shifts is None:
            require(rng is not None, "training-mode encode needs rng or shifts")
            shifts = rng.uniform(-alix.shift_range, alix.shift_range,
                                 size=(x.shape[0], 2))
        z = alix_forward(alix, x, shifts=shifts)
    else:
        shifts = None
        z = x
    B = z.shape[0]
    flat = z.reshape(B, -1)
    y, c_lin = linear_forward(flat, params["fw"], params["fb"])
    feat, fmask = relu_forward(y)
    cache = (caches, shifts, z.shape, c_lin, fmask, alix)
    return feat, cache


def encode_backward(gfeat, cache):
    """Returns (param grads, gradient field arriving at the shift layer
    output [B,C,h,w]); the latter feeds the discontinuity score."""
    caches, shifts, z_shape, c_lin, fmask, alix = cache
    grads = {}
    gy = relu_backward(gfeat, fmask)
    gflat, grads["fw"], grads["fb"] = linear_backward(gy, c_lin)
    g_at_shift = gflat.reshape(z_shape)
    gx = alix_backward(alix, g_at_shift, shifts=shifts) \
        if shifts is not None else g_at_shift
    for i in range(len(_CONV_PLAN), 0, -1):
        c_conv, mask = caches[i - 1]
        gy = relu_backward(gx, mask)
        gx, grads[f"c{i}w"], grads[f"c{i}b"] = conv2d_backward(gy, c_conv)
    return grads, g_at_shift


# -- heads ------------------------------------------------------------------


def head_forward(params, feat, context):
    """feat [B,256] + context one-hot [B,11] -> (out [B,10], cache)."""
    x = np.concatenate([feat, context], axis=1)
    y1, c1 = linear_forward(x, params["h1w"], params["h1b"])
    a1, m1 = relu_forward(y1)
    y2, c2 = linear_forward(a1, params["h2w"], params["h2b"])
    a2, m2 = relu_forward(y2)
    out, c3 = linear_forward(a2, params["ow"], params["ob"])
    return out, (c1, m1, c2, m2, c3)


def head_backward(gout, cache):
    """Returns (param grads, gradient w.r.t. the feature part [B,256])."""
    c1, m1, c2, m2, c3 = cache
    grads = {}
    g, grads["ow"], grads["ob"] = linear_backward(gout, c3)
    g = relu_backward(g, m2)
    g, grads["h2w"], grads["h2b"] = linear_backward(g, c2)
    g = relu_backward(g, m1)
    g, grads["h1w"], grads["h1b"] = linear_backward(g, c1)
    return grads, g[:, :FEATURE_DIM]


def clipped_min(q1, q2):
    """Elementwise min of the twin heads; ties route to the first head."""
    take1 = q1 <= q2
    return np.where(take1, q1, q2), take1


def forward_heads(nets, images, context, use_target=False, rng=None,
                  shifts=None, train_shift=False):
    """(pi [B,10], q1 [B,10], q2 [B,10]) without caches, for inference.

    use_target routes the Q values through the target encoder and target
    heads; the policy always reads the online encoder.
    """
    feat, _ = encode(nets.encoder, nets.alix, images, rng=rng, shifts=shifts,
                     train_shift=train_shift)
    pi = softmax(head_forward(nets.policy, feat, context)[0])
    if use_target:
        tfeat, _ = encode(nets.t_encoder, nets.alix, images, train_shift=False)
        q1 = head_forward(nets.t_q1, tfeat, context)[0]
        q2 = head_forward(nets.t_q2, tfeat, context)[0]
    else:
        q1 = head_forward(nets.q1, feat, context)[0]
        q2 = head_forward(nets.q2, feat, context)[0]
    for name, arr in (("pi", pi), ("q1", q1), ("q2", q2)):
        if not np.isfinite(arr).all():
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise FloatingPointError(
                f"non-finite {name} output at batch row {int(bad[0])}")
    return pi, q1, q2
