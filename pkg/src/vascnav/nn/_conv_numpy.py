"""Pure numpy im2row / col2im kernels (fallback when the compiled extension is absent)."""

import numpy as np
from numpy.lib.stride_tricks import as_strided


def im2row(x, k, stride):
    """Gather conv patches of a [B,C,H,W] array into rows.

    Returns [B*Ho*Wo, C*k*k] with row index (b*Ho + oh)*Wo + ow and
    column index (c*k + kh)*k + kw.
    """
    B, C, H, W = x.shape
    Ho = (H - k) // stride + 1
    Wo = (W - k) // stride + 1
    sb, sc, sh, sw = x.strides
    view = as_strided(
        x,
        shape=(B, Ho, Wo, C, k, k),
        strides=(sb, stride * sh, stride * sw, sc, sh, sw),
        writeable=False,
    )
    return view.reshape(B * Ho * Wo, C * k * k)


def col2im_add(gcols, B, C, H, W, k, stride):
    """Scatter-add patch-row gradients back onto a [B,C,H,W] grid."""
    Ho = (H - k) // stride + 1
    Wo = (W - k) // stride + 1
    g = gcols.reshape(B, Ho, Wo, C, k, k)
    gx = np.zeros((B, C, H, W), dtype=gcols.dtype)
    # For a fixed kernel offset the destination windows are disjoint, so a
    # strided slice add is safe; overlap across offsets accumulates.
    for kh in range(k):
        for kw in range(k):
            gx[:, :, kh : kh + stride * Ho : stride, kw : kw + stride * Wo : stride] += (
                g[:, :, :, :, kh, kw].transpose(0, 3, 1, 2)
            )
    return gx
