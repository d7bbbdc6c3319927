"""Finite-difference checks for every differentiable primitive."""

import numpy as np
import pytest

from seisfm import tensorkit as tk
from seisfm.tensorkit import Tensor, grad_check


def check(f, point, tol=1e-4, sample=None, seed=0):
    report = grad_check(f, point, h=1e-5, tol=tol, sample=sample, rng=np.random.default_rng(seed))
    assert report.passed, f"max rel err {report.max_rel_err:.3e}; failures: {report.failures()[:3]}"


RNG = np.random.default_rng(123)


class TestPrimitiveGradients:
    def test_conv2d_wrt_input(self):
        k = Tensor(RNG.normal(size=(3, 2, 3, 3)))
        b = Tensor(RNG.normal(size=3))
        check(lambda x: (tk.conv2d(x, k, b, stride=2, padding=1) * 0.5).sum(), RNG.normal(size=(2, 7, 7)))

    def test_conv2d_wrt_kernel(self):
        x = Tensor(RNG.normal(size=(2, 6, 6)))
        b = Tensor(RNG.normal(size=3))

        def f(kt):
            y = tk.conv2d(x, kt, b, stride=1, padding=1)
            return (y * y).mean()

        check(f, RNG.normal(size=(3, 2, 3, 3)))

    def test_conv2d_depthwise_wrt_kernel(self):
        x = Tensor(RNG.normal(size=(4, 6, 6)))

        def f(kt):
            y = tk.conv2d(x, kt, padding=3, groups=4)
            return (y * y).mean()

        check(f, RNG.normal(size=(4, 1, 7, 7)))

    def test_linear(self):
        w = Tensor(RNG.normal(size=(3, 4)))
        b = Tensor(RNG.normal(size=3))
        check(lambda x: (tk.linear(x, w, b) * tk.linear(x, w, b)).mean(), RNG.normal(size=(5, 4)))

    def test_linear_wrt_weight(self):
        x = Tensor(RNG.normal(size=(5, 4)))
        b = Tensor(RNG.normal(size=3))
        check(lambda w: tk.linear(x, w, b).abs().mean(), RNG.normal(size=(3, 4)) + 0.7)

    def test_layernorm(self):
        g = Tensor(RNG.normal(size=6))
        bb = Tensor(RNG.normal(size=6))
        check(lambda x: (tk.layernorm(x, g, bb) * tk.layernorm(x, g, bb)).mean(), RNG.normal(size=(3, 6)))

    def test_layernorm_wrt_gamma_beta(self):
        x = Tensor(RNG.normal(size=(3, 6)))
        bb = Tensor(RNG.normal(size=6))
        check(lambda g: (tk.layernorm(x, g, bb) * tk.layernorm(x, g, bb)).mean(), RNG.normal(size=6))

    def test_gelu(self):
        check(lambda x: tk.gelu(x).sum(), RNG.normal(size=(4, 5)))

    def test_softmax(self):
        t = Tensor(RNG.normal(size=(4, 5)))
        check(lambda x: (tk.softmax(x) * t).sum(), RNG.normal(size=(4, 5)))

    def test_attention_wrt_q(self):
        k = Tensor(RNG.normal(size=(4, 3)))
        v = Tensor(RNG.normal(size=(4, 3)))
        check(lambda q: (tk.attention(q, k, v) * tk.attention(q, k, v)).sum(), RNG.normal(size=(4, 3)))

    def test_attention_wrt_v(self):
        q = Tensor(RNG.normal(size=(4, 3)))
        k = Tensor(RNG.normal(size=(4, 3)))
        check(lambda v: tk.attention(q, k, v).abs().sum(), RNG.normal(size=(4, 3)) + 0.5)

    def test_bilinear_upsample(self):
        check(lambda x: (tk.bilinear_upsample2x(x) * tk.bilinear_upsample2x(x)).sum(), RNG.normal(size=(2, 3, 4)))

    def test_transposed_conv_wrt_input(self):
        k = Tensor(RNG.normal(size=(2, 3, 2, 2)))
        b = Tensor(RNG.normal(size=3))
        check(lambda x: (tk.transposed_conv2x(x, k, b) * tk.transposed_conv2x(x, k, b)).mean(), RNG.normal(size=(2, 4, 4)))

    def test_transposed_conv_wrt_kernel(self):
        x = Tensor(RNG.normal(size=(2, 4, 4)))
        check(lambda k: tk.transposed_conv2x(x, k).abs().mean(), RNG.normal(size=(2, 3, 2, 2)) + 0.4)

    def test_window_roundtrip_gradient(self):
        def f(x):
            wins, layout = tk.window_partition(x, 2)
            merged = tk.window_merge([w * 2.0 for w in wins], layout)
            return (merged * merged).sum()

        check(f, RNG.normal(size=(2, 4, 4)))

    def test_concat_getitem(self):
        def f(x):
            a = x[0]
            b = x[1]
            return (tk.concat([a * 2.0, b], axis=0) * tk.concat([a, b * 3.0], axis=0)).sum()

        check(f, RNG.normal(size=(2, 3, 4)))


class TestL1Gradient:
    def test_l1_signs_away_from_kinks(self):
        target = Tensor(np.zeros((3, 3)))
        point = RNG.normal(size=(3, 3))
        point[np.abs(point) < 0.3] = 0.5  # keep away from the kink

        x = Tensor(point, requires_grad=True)
        loss = (x - target).abs().sum()
        tk.backward(loss)
        np.testing.assert_array_equal(x.grad, np.sign(point))


@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_conv2d_grads_both_backends(backend):
    prev = tk.use_backend(backend)
    try:
        k = Tensor(RNG.normal(size=(2, 2, 3, 3)))
        check(lambda x: (tk.conv2d(x, k, stride=2, padding=2) * 0.25).sum(), RNG.normal(size=(2, 6, 6)))
    finally:
        tk.use_backend(prev)
