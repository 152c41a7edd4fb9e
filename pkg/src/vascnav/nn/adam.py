"""Adam optimizer over flat name->array parameter dicts."""

from dataclasses import dataclass, field

import numpy as np

from vascnav.errors import require


@dataclass
class AdamState:
    """Moment estimates and step counter for one parameter group."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state):
    """One in-place update: p -= lr * m_hat / (sqrt(v_hat) + eps).

    Bias correction divides by (1 - beta^t); the first step therefore moves
    each coordinate by ~lr*sign(g).
    """
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for name, g in grads.items():
        require(name in params, f"gradient for unknown parameter {name}")
        p = params[name]
        require(g.shape == p.shape, f"gradient shape {g.shape} != param shape {p.shape} for {name}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m += (1.0 - state.beta1) * (g - m)
        v += (1.0 - state.beta2) * (g * g - v)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
