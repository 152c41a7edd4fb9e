"""Minimal numpy autograd-free NN core: conv/linear/relu/softmax with hand-written backward."""

from vascnav.nn.backend import COMPILED, backend_name
from vascnav.nn.layers import (
    conv2d_backward,
    conv2d_forward,
    linear_backward,
    linear_forward,
    log_softmax,
    relu_backward,
    relu_forward,
    softmax,
)
from vascnav.nn.adam import AdamState, adam_step
from vascnav.nn.gradcheck import grad_check

__all__ = [
    "COMPILED",
    "backend_name",
    "conv2d_forward",
    "conv2d_backward",
    "linear_forward",
    "linear_backward",
    "relu_forward",
    "relu_backward",
    "softmax",
    "log_softmax",
    "AdamState",
    "adam_step",
    "grad_check",
]
