from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsaudit.autodiff import (
    Tensor,
    concat,
    log_weighted_sum_exp,
    numerical_gradient,
    parameter,
    stack,
)

TOLERANCE = 1e-6


def check(build, shape, seed, positive=False):
    """Compare the backward pass of ``sum(build(x) * w)`` against finite differences."""
    rng = np.random.default_rng(seed)
    data = rng.uniform(0.5, 2.0, size=shape) if positive else rng.normal(size=shape)
    x = parameter(data)
    out = build(x)
    w = rng.normal(size=out.shape)
    (out * w).sum().backward()

    def f():
        return float((build(Tensor(x.data)).data * w).sum())

    numeric = numerical_gradient(f, x)
    np.testing.assert_allclose(x.grad, numeric, rtol=TOLERANCE, atol=TOLERANCE)


OPS = {
    "add_tensor": (lambda x: x + Tensor(np.arange(3.0)), False),
    "add_scalar": (lambda x: 2.5 + x, False),
    "sub_broadcast": (lambda x: x - Tensor(np.ones((1, 3))), False),
    "rsub": (lambda x: 1.0 - x, False),
    "neg": (lambda x: -x, False),
    "mul_self": (lambda x: x * x, False),
    "mul_scalar": (lambda x: x * 3.0, False),
    "div": (lambda x: x / (x * x + 1.0), False),
    "div_scalar": (lambda x: x / 4.0, False),
    "matmul": (lambda x: x @ Tensor(np.arange(12.0).reshape(3, 4) / 10), False),
    "getitem": (lambda x: x[np.array([0, 0, 1])], False),
    "sum_axis": (lambda x: x.sum(axis=1), False),
    "sum_keepdims": (lambda x: x.sum(axis=0, keepdims=True) * x, False),
    "mean": (lambda x: x.mean(axis=0), False),
    "reshape": (lambda x: x.reshape(3, 2), False),
    "take_axis0": (lambda x: x.take([1, 1, 0], axis=0), False),
    "take_axis1": (lambda x: x.take([2, 0, 2, 2], axis=1), False),
    "prod": (lambda x: x.prod(axis=1), False),
    "prod_axis0": (lambda x: x.prod(axis=0), False),
    "log": (lambda x: x.log(), True),
    "exp": (lambda x: x.exp(), False),
    "log_softmax": (lambda x: x.log_softmax(axis=1), False),
    "softmax": (lambda x: x.softmax(axis=0), False),
    "concat": (lambda x: concat([x, x * 2.0], axis=1), False),
    "stack": (lambda x: stack([x, x.exp()], axis=0), False),
    "lwse": (lambda x: log_weighted_sum_exp(x, np.array([[1.0, 0.0, 2.0], [0.5, 0.5, 0.0]])), False),
}


class TestGradients:
    @pytest.mark.parametrize("name", sorted(OPS))
    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_matches_finite_differences(self, name, seed):
        build, positive = OPS[name]
        check(build, (2, 3), seed, positive)

    def test_reused_node_accumulates(self):
        x = parameter([1.0, 2.0])
        y = x * 3.0
        (y * y + y).sum().backward()
        np.testing.assert_allclose(x.grad, 2 * 9 * x.data + 3)

    def test_prod_with_zero_entry(self):
        x = parameter([[0.0, 2.0, 3.0]])
        x.prod(axis=1).sum().backward()
        np.testing.assert_allclose(x.grad, [[6.0, 0.0, 0.0]])

    def test_constants_get_no_gradient(self):
        c = Tensor([1.0, 2.0])
        x = parameter([3.0, 4.0])
        (c * x).sum().backward()
        assert c.grad is None
        np.testing.assert_allclose(x.grad, [1.0, 2.0])

    def test_unused_branch_still_releases_ancestors(self):
        x = parameter([1.0])
        dead = x[np.array([], dtype=np.int64)]
        (x * 2.0 + dead.sum()).sum().backward()
        np.testing.assert_allclose(x.grad, [2.0])

    def test_lwse_all_zero_weights(self):
        x = parameter([[1.0, 2.0]])
        out = log_weighted_sum_exp(x, np.zeros((1, 2)))
        assert out.data[0] == -np.inf


class TestValues:
    def test_log_softmax_normalizes(self):
        x = Tensor(np.random.default_rng(0).normal(size=(4, 5)) * 50)
        np.testing.assert_allclose(np.exp(x.log_softmax(axis=1).data).sum(axis=1), 1.0)

    def test_lwse_matches_direct(self):
        rng = np.random.default_rng(1)
        x, w = rng.normal(size=(3, 4)), rng.uniform(size=(3, 4))
        np.testing.assert_allclose(log_weighted_sum_exp(Tensor(x), w).data, np.log((w * np.exp(x)).sum(axis=1)))
