"""Forward/backward primitives on numpy arrays.

Convolutions run as im2row + BLAS matmul; the gather/scatter kernels come from
vascnav.nn.backend (compiled when available). Weights are laid out output-major:
conv [O,C,k,k], linear [O,D]. Gradients are exact analytic adjoints; see
gradcheck for the finite-difference verification harness.

Shape contracts are always checked. Full finiteness sweeps over activations are
too slow for the training hot path, so they are enforced at step granularity by
the trainer and can be switched on here (STRICT_FINITE) for tests.
"""

import numpy as np

from vascnav.errors import ContractViolation, require
from vascnav.nn import backend

STRICT_FINITE = False

_FLOATS = (np.float32, np.float64)


def _check_finite(name, arr):
    if STRICT_FINITE and not np.isfinite(arr).all():
        raise ContractViolation(f"non-finite values in {name}")


def conv2d_forward(x, w, b, stride):
    """Valid (unpadded) 2-d convolution.

    Args:
        x: [C,H,W] or [B,C,H,W]
        w: [O,C,k,k], square kernel
        b: [O]
        stride: positive int
    Returns (y, cache); y is [O,Ho,Wo] or [B,O,Ho,Wo] matching the input rank.
    """
    single = x.ndim == 3
    if single:
        x = x[None]
    require(x.ndim == 4, f"conv input must be 3- or 4-d, got shape {x.shape}")
    require(w.ndim == 4 and w.shape[2] == w.shape[3], f"bad conv weight shape {w.shape}")
    O, C, k, _ = w.shape
    B, Cx, H, W = x.shape
    require(Cx == C, f"conv channel mismatch: input {Cx}, weight {C}")
    require(b.shape == (O,), f"bad conv bias shape {b.shape}")
    require(stride >= 1, f"stride must be >= 1, got {stride}")
    require(H >= k and W >= k, f"input {H}x{W} smaller than kernel {k}")
    require(x.dtype.type in _FLOATS and w.dtype == x.dtype, "conv dtypes must match, float32/64")
    _check_finite("conv input", x)
    _check_finite("conv weight", w)

    x = np.ascontiguousarray(x)
    Ho = (H - k) // stride + 1
    Wo = (W - k) // stride + 1
    cols = backend.im2row(x, k, stride)
    y = cols @ w.reshape(O, -1).T
    y += b
    y = np.ascontiguousarray(y.reshape(B, Ho, Wo, O).transpose(0, 3, 1, 2))
    cache = (cols, x.shape, w, stride, single)
    return (y[0] if single else y), cache


def conv2d_backward(gy, cache):
    """Gradient of conv2d_forward. Returns (gx, gw, gb)."""
    cols, x_shape, w, stride, single = cache
    if single:
        gy = gy[None]
    B, C, H, W = x_shape
    O, _, k, _ = w.shape
    G = gy.transpose(0, 2, 3, 1).reshape(-1, O)
    G = np.ascontiguousarray(G)
    gw = (G.T @ cols).reshape(w.shape)
    gb = G.sum(axis=0)
    gcols = np.ascontiguousarray(G @ w.reshape(O, -1))
    gx = backend.col2im_add(gcols, B, C, H, W, k, stride)
    return (gx[0] if single else gx), gw, gb


def linear_forward(x, w, b):
    """y = x @ w.T + b for x [B,D] or [D], w [O,D], b [O]."""
    single = x.ndim == 1
    if single:
        x = x[None]
    require(x.ndim == 2 and w.ndim == 2, f"bad linear shapes x{x.shape} w{w.shape}")
    require(x.shape[1] == w.shape[1], f"linear dim mismatch: x{x.shape} w{w.shape}")
    require(b.shape == (w.shape[0],), f"bad linear bias shape {b.shape}")
    _check_finite("linear input", x)
    y = x @ w.T + b
    cache = (x, w, single)
    return (y[0] if single else y), cache


def linear_backward(gy, cache):
    """Gradient of linear_forward. Returns (gx, gw, gb)."""
    x, w, single = cache
    if single:
        gy = gy[None]
    gw = gy.T @ x
    gb = gy.sum(axis=0)
    gx = gy @ w
    return (gx[0] if single else gx), gw, gb


def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(gy, mask):
    return gy * mask


def softmax(x, axis=-1):
    """Max-subtracted softmax; invariant under additive shifts along axis."""
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(x, axis=-1):
    z = x - x.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))
