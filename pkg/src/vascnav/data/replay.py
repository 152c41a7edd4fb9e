"""Prioritized sampling over transition weights.

Weights follow f_i <- (1-tau) f_i + tau min(|td|+eps1, eps2) for sampled
transitions only, start at eps2, and are drawn with probability f_i^k / sum.
No importance-sampling correction is applied anywhere. At a few thousand
transitions cumulative-sum inversion beats a sum tree on simplicity; the
interface hides the choice.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from vascnav.errors import require


@dataclass
class PerState:
    f: np.ndarray
    tau: float = 0.1
    k: float = 1.0
    eps1: float = 1.0
    eps2: float = 20.0
    frozen: bool = field(default=False)  # pretraining leaves weights untouched


def init_per(n, tau=0.1, k=1.0, eps1=1.0, eps2=20.0):
    require(n > 0, "cannot prioritize an empty dataset")
    return PerState(f=np.full(n, eps2, dtype=np.float64),
                    tau=tau, k=k, eps1=eps1, eps2=eps2)


def sample_probabilities(per):
    w = per.f ** per.k
    return w / w.sum()


def sample_batch(per, batch_size, rng):
    """Indices drawn with replacement, p(i) proportional to f_i^k."""
    p = sample_probabilities(per)
    c = np.cumsum(p)
    c[-1] = 1.0  # guard the top edge against cumsum rounding
    return np.searchsorted(c, rng.random(batch_size), side="right")


def update_weights(per, indices, td_errors):
    """Moves sampled weights toward the clamped |td| target.

    Applied per draw in order, so an index sampled twice in one batch is
    pulled twice. NaN errors are skipped and reported; the weight keeps its
    value. No-op while frozen.
    """
    require(len(indices) == len(td_errors),
            f"{len(indices)} indices vs {len(td_errors)} td errors")
    if per.frozen:
        return
    skipped = []
    for i, d in zip(indices, td_errors):
        if np.isnan(d):
            skipped.append(int(i))
            continue
        target = min(abs(float(d)) + per.eps1, per.eps2)
        per.f[i] = (1.0 - per.tau) * per.f[i] + per.tau * target
    if skipped:
        warnings.warn(f"skipped NaN td errors at indices {skipped}",
                      RuntimeWarning, stacklevel=2)
