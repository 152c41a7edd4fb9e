"""Adaptive local signal mixing: a stochastic shift layer with an exact adjoint backward.

During training each feature map is resampled at a random subpixel offset
(bilinear, replicate borders); at evaluation the layer is the identity. The
backward pass is the transpose of the interpolation, which low-passes the
gradient entering the encoder. The shift range S adapts online against a
discontinuity target measured on that gradient.

The shift is realized as a pair of per-axis interpolation matrices (two
nonzeros per row, border clamping folds duplicates), so the backward pass is
the exact adjoint by construction and a zero offset is a bit-exact identity.
"""

from dataclasses import dataclass, field

import numpy as np

from vascnav.errors import UsageError, require


@dataclass
class AlixState:
    """Shift range and bookkeeping for the mixing layer."""

    shift_range: float
    s_max: float = 1.0
    mode: str = "training"
    last_shifts: np.ndarray | None = field(default=None, repr=False)
    last_shape: tuple | None = None

    def __post_init__(self):
        require(0.0 <= self.shift_range <= self.s_max, f"shift range {self.shift_range} outside [0, {self.s_max}]")
        require(self.mode in ("training", "evaluation"), f"bad mode {self.mode!r}")


def _interp_matrix(n, delta, dtype):
    """Row i of the result reads input cells floor(i+delta) and floor(i+delta)+1."""
    lo = int(np.floor(delta))
    frac = dtype.type(delta - lo)
    rows = np.arange(n)
    j0 = np.clip(rows + lo, 0, n - 1)
    j1 = np.clip(rows + lo + 1, 0, n - 1)
    A = np.zeros((n, n), dtype=dtype)
    np.add.at(A, (rows, j0), dtype.type(1) - frac)
    np.add.at(A, (rows, j1), frac)
    return A


def _matrices(shifts, H, W, dtype):
    Ah = np.stack([_interp_matrix(H, dh, dtype) for dh, _ in shifts])
    Aw = np.stack([_interp_matrix(W, dw, dtype) for _, dw in shifts])
    return Ah, Aw


def alix_forward(state, z, rng=None, shifts=None):
    """Shift z ([C,H,W] or [B,C,H,W]) by per-element random subpixel offsets.

    Training mode draws one (dh, dw) pair per batch element, uniform on
    [-S, S]^2, shared across that element's channels and cells; pass `shifts`
    [B,2] to freeze them (gradient checking). Evaluation mode returns z
    unchanged. The drawn shifts are recorded on the state for the paired
    backward.
    """
    require(np.isfinite(state.shift_range) and state.shift_range >= 0.0,
            f"bad shift range {state.shift_range}")
    if state.mode == "evaluation":
        state.last_shifts = None
        return z
    single = z.ndim == 3
    zb = z[None] if single else z
    B, C, H, W = zb.shape
    require(H >= 2 and W >= 2, f"feature map {H}x{W} too small to shift")
    if shifts is None:
        require(rng is not None, "training-mode forward needs an rng or explicit shifts")
        shifts = rng.uniform(-state.shift_range, state.shift_range, size=(B, 2))
    else:
        shifts = np.asarray(shifts, dtype=np.float64)
        require(shifts.shape == (B, 2), f"shifts shape {shifts.shape} != ({B}, 2)")
    Ah, Aw = _matrices(shifts, H, W, zb.dtype)
    out = np.matmul(np.matmul(Ah[:, None], zb), Aw.transpose(0, 2, 1)[:, None])
    state.last_shifts = shifts
    state.last_shape = zb.shape
    return out[0] if single else out


def alix_backward(state, grad, shifts=None):
    """Exact adjoint of the last training-mode forward (or of explicit shifts)."""
    if shifts is None:
        if state.last_shifts is None:
            raise UsageError("alix_backward without a preceding training-mode forward")
        shifts = state.last_shifts
    single = grad.ndim == 3
    gb = grad[None] if single else grad
    B, C, H, W = gb.shape
    shifts = np.asarray(shifts, dtype=np.float64)
    require(shifts.shape == (B, 2), f"shifts shape {shifts.shape} != ({B}, 2)")
    Ah, Aw = _matrices(shifts, H, W, gb.dtype)
    out = np.matmul(np.matmul(Ah.transpose(0, 2, 1)[:, None], gb), Aw[:, None])
    return out[0] if single else out


def nd_score(g, eps_div=1e-8):
    """Normalized discontinuity of a gradient field [..., H, W].

    Per cell, D is the mean squared one-step difference along each axis
    (the far edge of an axis reuses its inward difference; extent-1 axes are
    skipped), and the score is mean(log(1 + D / (g^2 + eps_div))).
    """
    g = np.asarray(g, dtype=np.float64)
    require(g.ndim >= 2, f"need a spatial field, got shape {g.shape}")
    H, W = g.shape[-2:]
    terms = []
    if H >= 2:
        d = np.diff(g, axis=-2)
        terms.append(np.concatenate([d, d[..., -1:, :]], axis=-2) ** 2)
    if W >= 2:
        d = np.diff(g, axis=-1)
        terms.append(np.concatenate([d, d[..., :, -1:]], axis=-1) ** 2)
    require(terms, f"field {H}x{W} has no axis to difference")
    D = terms[0] if len(terms) == 1 else (terms[0] + terms[1]) / 2.0
    return float(np.mean(np.log1p(D / (g * g + eps_div))))


def update_shift_range(state, observed_nd, target_nd, lr_s):
    """Move S along the descent direction of -S*(observed - target), clamped."""
    require(observed_nd >= 0.0, f"negative discontinuity score {observed_nd}")
    s = state.shift_range + lr_s * (observed_nd - target_nd)
    state.shift_range = float(np.clip(s, 0.0, state.s_max))
    return state.shift_range
