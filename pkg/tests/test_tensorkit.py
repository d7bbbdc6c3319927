import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seisfm import tensorkit as tk
from seisfm.tensorkit import ShapeError, Tensor


@pytest.fixture(params=["numba", "numpy"])
def kernel_backend(request):
    prev = tk.use_backend(request.param)
    yield request.param
    tk.use_backend(prev)


def t(data, rg=False):
    return Tensor(np.asarray(data, dtype=np.float64), requires_grad=rg)


# -- conv2d -------------------------------------------------------------------


class TestConv2d:
    def test_identity_kernel(self, kernel_backend):
        x = t(np.random.default_rng(0).normal(size=(3, 5, 7)))
        k = t(np.zeros((3, 3, 1, 1)))
        k.data[np.arange(3), np.arange(3), 0, 0] = 1.0
        b = t(np.zeros(3))
        y = tk.conv2d(x, k, b)
        np.testing.assert_array_equal(y.data, x.data)

    def test_averaging_preserves_constant(self, kernel_backend):
        x = t(np.full((1, 6, 6), 2.0))
        k = t(np.full((1, 1, 3, 3), 1.0 / 9.0))
        y = tk.conv2d(x, k, t(np.zeros(1)))
        np.testing.assert_allclose(y.data, 2.0, rtol=1e-12)

    def test_hand_cross_correlation(self, kernel_backend):
        # [[1,2],[3,4]] against [[1,0],[0,1]]: 1*1 + 4*1 = 5
        x = t([[[1.0, 2.0], [3.0, 4.0]]])
        k = t([[[[1.0, 0.0], [0.0, 1.0]]]])
        y = tk.conv2d(x, k, t(np.zeros(1)))
        assert y.data.shape == (1, 1, 1)
        assert y.data[0, 0, 0] == 5.0

    def test_channel_mismatch_rejected(self, kernel_backend):
        x = t(np.zeros((3, 4, 4)))
        k = t(np.zeros((2, 4, 2, 2)))
        with pytest.raises(ShapeError, match="input channels"):
            tk.conv2d(x, k)

    @given(
        h=st.integers(1, 12),
        w=st.integers(1, 12),
        kh=st.integers(1, 5),
        kw=st.integers(1, 5),
        stride=st.integers(1, 3),
        pad=st.integers(0, 3),
    )
    @settings(max_examples=60, deadline=None)
    def test_output_shape_formula(self, h, w, kh, kw, stride, pad):
        if kh > h + 2 * pad or kw > w + 2 * pad:
            return
        x = t(np.ones((2, h, w)))
        k = t(np.ones((3, 2, kh, kw)))
        y = tk.conv2d(x, k, stride=stride, padding=pad)
        ho = (h + 2 * pad - kh) // stride + 1
        wo = (w + 2 * pad - kw) // stride + 1
        assert y.data.shape == (3, ho, wo)

    def test_backends_agree(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(4, 9, 11))
        k = rng.normal(size=(6, 4, 3, 3))
        b = rng.normal(size=6)
        outs = {}
        for name in ("numba", "numpy"):
            prev = tk.use_backend(name)
            try:
                outs[name] = tk.conv2d(t(x), t(k), t(b), stride=2, padding=1).data
            finally:
                tk.use_backend(prev)
        np.testing.assert_allclose(outs["numba"], outs["numpy"], rtol=1e-12, atol=1e-12)

    def test_depthwise_matches_dense(self, kernel_backend):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(4, 6, 6))
        kd = rng.normal(size=(4, 1, 3, 3))
        y_dw = tk.conv2d(t(x), t(kd), stride=1, padding=1, groups=4).data
        # equivalent dense kernel: block diagonal over channels
        kdense = np.zeros((4, 4, 3, 3))
        for c in range(4):
            kdense[c, c] = kd[c, 0]
        y_dense = tk.conv2d(t(x), t(kdense), stride=1, padding=1).data
        np.testing.assert_allclose(y_dw, y_dense, rtol=1e-12, atol=1e-12)


# -- linear / layernorm / attention -------------------------------------------


class TestLinear:
    def test_identity(self):
        x = t(np.random.default_rng(1).normal(size=(5, 3)))
        w = t(np.eye(3))
        y = tk.linear(x, w, t(np.zeros(3)))
        np.testing.assert_array_equal(y.data, x.data)

    def test_hand_product(self):
        y = tk.linear(t([1.0, 1.0]), t([[1.0, 1.0], [1.0, -1.0]]), t([0.0, 0.0]))
        np.testing.assert_array_equal(y.data, [2.0, 0.0])

    def test_bias_only(self):
        x = t(np.random.default_rng(2).normal(size=(4, 3)))
        y = tk.linear(x, t(np.zeros((2, 3))), t([5.0, -1.0]))
        np.testing.assert_array_equal(y.data, np.tile([5.0, -1.0], (4, 1)))

    def test_dim_mismatch(self):
        with pytest.raises(ShapeError):
            tk.linear(t(np.zeros((4, 3))), t(np.zeros((2, 5))))


class TestLayerNorm:
    def test_constant_vector_zeros(self):
        y = tk.layernorm(t(np.full(8, 3.5)), t(np.ones(8)), t(np.zeros(8)), eps=1e-6)
        np.testing.assert_allclose(y.data, 0.0, atol=1e-12)

    def test_already_normalized(self):
        y = tk.layernorm(t([-1.0, 1.0]), t(np.ones(2)), t(np.zeros(2)), eps=1e-14)
        np.testing.assert_allclose(y.data, [-1.0, 1.0], rtol=1e-7)

    def test_beta_shift_gamma_zero(self):
        x = t(np.random.default_rng(0).normal(size=(3, 4)))
        y = tk.layernorm(x, t(np.zeros(4)), t(np.full(4, 5.0)))
        np.testing.assert_array_equal(y.data, np.full((3, 4), 5.0))


class TestAttention:
    def test_single_token_returns_v(self):
        rng = np.random.default_rng(0)
        q, k, v = (t(rng.normal(size=(1, 4))) for _ in range(3))
        np.testing.assert_allclose(tk.attention(q, k, v).data, v.data, rtol=1e-12)

    def test_identical_keys_average_v(self):
        rng = np.random.default_rng(1)
        q = t(rng.normal(size=(3, 4)))
        k = t(np.tile(rng.normal(size=(1, 4)), (3, 1)))
        v = t(rng.normal(size=(3, 4)))
        out = tk.attention(q, k, v)
        np.testing.assert_allclose(out.data, np.tile(v.data.mean(axis=0), (3, 1)), rtol=1e-10)

    def test_hand_softmax_weights(self):
        # logits q k^T / sqrt(2) = [[0, ln3], [0, 0]] -> row-0 weights [0.25, 0.75]
        s = math.sqrt(2.0)
        q = t([[1.0, 0.0], [0.0, 0.0]])
        k = t([[0.0, 0.0], [s * math.log(3.0), 0.0]])
        v = t([[1.0, 0.0], [0.0, 1.0]])
        out = tk.attention(q, k, v)
        np.testing.assert_allclose(out.data[0], [0.25, 0.75], rtol=1e-12)
        np.testing.assert_allclose(out.data[1], [0.5, 0.5], rtol=1e-12)


# -- upsampling ----------------------------------------------------------------


class TestUpsample:
    def test_constant_preserved(self):
        y = tk.bilinear_upsample2x(t(np.full((2, 3, 5), 1.25)))
        np.testing.assert_allclose(y.data, 1.25, rtol=1e-12)

    def test_shape_contract(self):
        y = tk.bilinear_upsample2x(t(np.zeros((3, 16, 16))))
        assert y.data.shape == (3, 32, 32)

    def test_ramp_interpolation(self):
        # ramp [0,1] along W; sample centers (i+0.5)/2-0.5 for i=0..3 give
        # src positions -0.25, 0.25, 0.75, 1.25 -> clamped values 0, .25, .75, 1
        y = tk.bilinear_upsample2x(t(np.array([[[0.0, 1.0]]])))
        np.testing.assert_allclose(y.data[0, 0], [0.0, 0.25, 0.75, 1.0], rtol=1e-12)
        np.testing.assert_allclose(y.data[0, 1], [0.0, 0.25, 0.75, 1.0], rtol=1e-12)


class TestTransposedConv:
    def test_single_pixel_scatters_block(self):
        x = t(np.array([[[3.0]]]))
        k = t(np.ones((1, 1, 2, 2)))
        y = tk.transposed_conv2x(x, k, t(np.zeros(1)))
        np.testing.assert_array_equal(y.data, np.full((1, 2, 2), 3.0))

    def test_zero_input_gives_bias(self):
        x = t(np.zeros((2, 3, 3)))
        k = t(np.random.default_rng(0).normal(size=(2, 4, 2, 2)))
        y = tk.transposed_conv2x(x, k, t([1.0, 2.0, 3.0, 4.0]))
        for c, bval in enumerate([1.0, 2.0, 3.0, 4.0]):
            np.testing.assert_array_equal(y.data[c], np.full((6, 6), bval))

    def test_shape_contract(self):
        y = tk.transposed_conv2x(t(np.zeros((8, 7, 7))), t(np.zeros((8, 5, 2, 2))))
        assert y.data.shape == (5, 14, 14)


# -- window partition ----------------------------------------------------------


class TestWindows:
    def test_full_window_is_input(self):
        x = t(np.random.default_rng(0).normal(size=(2, 4, 4)))
        wins, layout = tk.window_partition(x, 4)
        assert len(wins) == 1
        np.testing.assert_array_equal(wins[0].data, x.data)
        np.testing.assert_array_equal(tk.window_merge(wins, layout).data, x.data)

    def test_window_indexing(self):
        x = np.arange(16, dtype=np.float64).reshape(1, 4, 4)
        wins, _ = tk.window_partition(t(x), 2)
        assert len(wins) == 4
        np.testing.assert_array_equal(wins[0].data[0], x[0, :2, :2])
        np.testing.assert_array_equal(wins[1].data[0], x[0, :2, 2:])
        np.testing.assert_array_equal(wins[2].data[0], x[0, 2:, :2])

    def test_indivisible_rejected(self):
        with pytest.raises(ShapeError):
            tk.window_partition(t(np.zeros((1, 5, 4))), 2)

    @given(
        c=st.integers(1, 3),
        gh=st.integers(1, 4),
        gw=st.integers(1, 4),
        win=st.integers(1, 4),
        seed=st.integers(0, 2**31 - 1),
    )
    @settings(max_examples=50, deadline=None)
    def test_roundtrip_identity(self, c, gh, gw, win, seed):
        x = np.random.default_rng(seed).normal(size=(c, gh * win, gw * win))
        wins, layout = tk.window_partition(t(x), win)
        merged = tk.window_merge(wins, layout)
        np.testing.assert_array_equal(merged.data, x)


# -- backward ------------------------------------------------------------------


class TestBackward:
    def test_sum_of_squares(self):
        x = t([1.0, 2.0], rg=True)
        tk.backward((x * x).sum())
        np.testing.assert_array_equal(x.grad, [2.0, 4.0])

    def test_frozen_leaf_gets_no_grad(self):
        x = t([1.0, 2.0], rg=True)
        frozen = t([3.0, 4.0], rg=False)
        tk.backward((x * frozen).sum())
        assert frozen.grad is None
        np.testing.assert_array_equal(x.grad, frozen.data)

    def test_non_scalar_loss_rejected(self):
        x = t([1.0, 2.0], rg=True)
        with pytest.raises(ShapeError, match="scalar"):
            tk.backward(x * 2.0)

    def test_grad_accumulates_over_fanout(self):
        x = t([2.0], rg=True)
        y = (x * 3.0 + x * x).sum()  # d/dx = 3 + 2x = 7
        tk.backward(y)
        np.testing.assert_allclose(x.grad, [7.0])

    def test_no_grad_context(self):
        x = t([1.0], rg=True)
        with tk.no_grad():
            y = (x * x).sum()
        assert not y.requires_grad
        assert y._parents == ()

    def test_determinism_bitwise(self, kernel_backend):
        def run():
            rng = np.random.default_rng(42)
            x = t(rng.normal(size=(2, 8, 8)), rg=True)
            k = t(rng.normal(size=(3, 2, 3, 3)), rg=True)
            b = t(rng.normal(size=3), rg=True)
            y = tk.gelu(tk.conv2d(x, k, b, stride=1, padding=1))
            loss = (y * y).mean()
            tk.backward(loss)
            return loss.data.copy(), x.grad.copy(), k.grad.copy()

        l1, xg1, kg1 = run()
        l2, xg2, kg2 = run()
        assert np.array_equal(l1, l2)
        assert np.array_equal(xg1, xg2)
        assert np.array_equal(kg1, kg2)


class TestStrictShapes:
    def test_elementwise_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            t(np.zeros((2, 3))) + t(np.zeros((3, 2)))
        with pytest.raises(ShapeError):
            t(np.zeros((2, 3))) * t(np.zeros((2, 1)))

    def test_scalar_ops_allowed(self):
        x = t([1.0, 2.0])
        np.testing.assert_array_equal((x * 2.0 + 1.0).data, [3.0, 5.0])
