"""Linear/relu/softmax primitives: hand examples, FD gradients, invariance properties."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vascnav import nn


def test_linear_forward_hand_case():
    x = np.array([1.0, 2.0])
    w = np.array([[3.0, 4.0], [5.0, 6.0], [0.5, -1.0]])
    b = np.array([0.1, -0.2, 0.0])
    y, _ = nn.linear_forward(x, w, b)
    assert np.allclose(y, [11.1, 16.8, -1.5])


def test_linear_and_relu_gradients():
    rng = np.random.default_rng(5)
    params = {
        "w": rng.standard_normal((4, 6)),
        "b": rng.standard_normal(4),
        "x": rng.standard_normal((3, 6)),
    }
    proj = rng.standard_normal((3, 4))

    def loss_fn(p):
        y, _ = nn.linear_forward(p["x"], p["w"], p["b"])
        h, _ = nn.relu_forward(y)
        return float(np.sum(proj * h) + np.sum(h * h))

    def grad_fn(p):
        y, cache = nn.linear_forward(p["x"], p["w"], p["b"])
        h, mask = nn.relu_forward(y)
        gy = nn.relu_backward(proj + 2.0 * h, mask)
        gx, gw, gb = nn.linear_backward(gy, cache)
        return {"w": gw, "b": gb, "x": gx}

    report = nn.grad_check(loss_fn, grad_fn, params)
    assert max(report.values()) <= 1e-6, report


def test_relu_zeroes_negatives_and_keeps_positives():
    x = np.array([-2.0, -0.5, 0.0, 0.5, 3.0])
    y, mask = nn.relu_forward(x)
    assert np.array_equal(y, [0.0, 0.0, 0.0, 0.5, 3.0])
    assert np.array_equal(nn.relu_backward(np.ones(5), mask), [0.0, 0.0, 0.0, 1.0, 1.0])


def test_softmax_of_constant_vector_is_exactly_uniform():
    for n in (2, 10, 7):
        p = nn.softmax(np.full(n, 3.25))
        assert np.array_equal(p, np.full(n, 1.0 / n))


def test_softmax_large_shift_example():
    a = nn.softmax(np.array([1000.0, 1001.0]))
    b = nn.softmax(np.array([0.0, 1.0]))
    assert np.array_equal(a, b)
    assert np.all(np.isfinite(a))


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-50, 50), min_size=2, max_size=12),
    st.floats(-1e3, 1e3),
)
def test_softmax_shift_invariance_property(vals, c):
    x = np.array(vals)
    a = nn.softmax(x)
    b = nn.softmax(x + c)
    assert abs(a.sum() - 1.0) < 1e-12
    assert np.max(np.abs(a - b)) < 1e-9


def test_log_softmax_consistent_with_softmax():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((6, 10)) * 30
    ls = nn.log_softmax(x)
    assert np.max(np.abs(np.exp(ls) - nn.softmax(x))) < 1e-12
    assert np.max(np.abs(ls.sum(axis=-1) - np.log(nn.softmax(x)).sum(axis=-1))) < 1e-6


def test_uniform_policy_entropy_is_log_n():
    p = nn.softmax(np.zeros(10))
    h = -np.sum(p * np.log(p))
    assert np.isclose(h, np.log(10.0), atol=1e-12)


def test_single_and_batched_linear_agree():
    # BLAS may route the single-row product through a different kernel, so
    # agreement is to rounding, not bitwise.
    rng = np.random.default_rng(9)
    x = rng.standard_normal((4, 5))
    w = rng.standard_normal((3, 5))
    b = rng.standard_normal(3)
    y, _ = nn.linear_forward(x, w, b)
    for i in range(4):
        yi, _ = nn.linear_forward(x[i], w, b)
        assert np.allclose(y[i], yi, atol=1e-12)
