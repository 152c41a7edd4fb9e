"""Central finite-difference verification of analytic gradients.

Run in float64. For large parameter arrays a random subset of coordinates is
probed (exhaustive FD over ~1e5 parameters does not fit a test budget); small
arrays are probed exhaustively.
"""

import numpy as np

from vascnav.errors import require


def grad_check(loss_fn, grad_fn, params, h=1e-5, sample=None, rng=None,
               floor=1e-8):
    """Compare analytic gradients against central differences.

    Args:
        loss_fn: params -> scalar loss. Must be deterministic.
        grad_fn: params -> dict of analytic gradients, keys matching params.
        params: dict name -> float64 array, perturbed in place and restored.
        h: FD step.
        sample: max coordinates probed per array (None = all).
        rng: Generator used when subsampling.
        floor: denominator floor. Coordinates whose gradient nearly cancels
            (bias sums over many spatial positions can land around 1e-6)
            sit below the FD roundoff noise of an O(10) loss; flooring the
            denominator turns the test into an absolute-error bound there
            instead of comparing noise against noise.
    Returns dict name -> max relative error over probed coordinates, where
    rel = |a - n| / max(|a| + |n|, floor).
    """
    for name, p in params.items():
        require(p.dtype == np.float64, f"grad_check requires float64 params, {name} is {p.dtype}")
        # a non-contiguous array would make reshape(-1) a copy and the
        # perturbation a silent no-op
        require(p.flags["C_CONTIGUOUS"], f"grad_check requires C-contiguous params, {name} is not")
    grads = grad_fn(params)
    report = {}
    for name, p in params.items():
        g = np.asarray(grads[name]).reshape(-1)
        flat = p.reshape(-1)
        if sample is not None and flat.size > sample:
            require(rng is not None, "rng required when subsampling coordinates")
            idxs = rng.choice(flat.size, size=sample, replace=False)
        else:
            idxs = np.arange(flat.size)
        worst = 0.0
        for i in idxs:
            keep = flat[i]
            flat[i] = keep + h
            lp = loss_fn(params)
            flat[i] = keep - h
            lm = loss_fn(params)
            flat[i] = keep
            num = (lp - lm) / (2.0 * h)
            rel = abs(g[i] - num) / max(abs(g[i]) + abs(num), floor)
            worst = max(worst, rel)
        report[name] = worst
    return report
