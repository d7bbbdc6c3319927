"""Parameterized layers and blocks shared by encoder and decoder builders.

Every layer registers its tensors in a ParameterStore under a dotted name and
closes over them for the forward pass. Weight init is truncated normal
(std 0.02); biases start at zero, norm scales at one.
"""

from __future__ import annotations

import numpy as np

from . import tensorkit as tk
from .params import fan_in_normal, trunc_normal


def _weight(rng, shape, init, dtype):
    if init == "fan_in":
        return fan_in_normal(rng, shape, dtype=dtype)
    if init == "zero":
        return np.zeros(shape, dtype=dtype)
    return trunc_normal(rng, shape, dtype=dtype)


class Conv2d:
    def __init__(self, store, name, partition, rng, cin, cout, k, stride=1, padding=0, groups=1,
                 dtype=np.float64, init="trunc"):
        self.stride = stride
        self.padding = padding
        self.groups = groups
        self.weight = store.add(f"{name}.weight", _weight(rng, (cout, cin // groups, k, k), init, dtype), partition)
        self.bias = store.add(f"{name}.bias", np.zeros(cout, dtype=dtype), partition)

    def __call__(self, x):
        return tk.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding, groups=self.groups)


class TransposedConv2x:
    def __init__(self, store, name, partition, rng, cin, cout, dtype=np.float64, init="trunc"):
        if init == "fan_in":
            w = trunc_normal(rng, (cin, cout, 2, 2), std=float(np.sqrt(2.0 / cin)), dtype=dtype)
        else:
            w = trunc_normal(rng, (cin, cout, 2, 2), dtype=dtype)
        self.weight = store.add(f"{name}.weight", w, partition)
        self.bias = store.add(f"{name}.bias", np.zeros(cout, dtype=dtype), partition)

    def __call__(self, x):
        return tk.transposed_conv2x(x, self.weight, self.bias)


class Linear:
    def __init__(self, store, name, partition, rng, din, dout, dtype=np.float64, init="trunc"):
        self.weight = store.add(f"{name}.weight", _weight(rng, (dout, din), init, dtype), partition)
        self.bias = store.add(f"{name}.bias", np.zeros(dout, dtype=dtype), partition)

    def __call__(self, x):
        return tk.linear(x, self.weight, self.bias)


class LayerNorm:
    """LayerNorm over the trailing dimension."""

    def __init__(self, store, name, partition, d, dtype=np.float64, eps=1e-6):
        self.eps = eps
        self.gamma = store.add(f"{name}.gamma", np.ones(d, dtype=dtype), partition)
        self.beta = store.add(f"{name}.beta", np.zeros(d, dtype=dtype), partition)

    def __call__(self, x):
        return tk.layernorm(x, self.gamma, self.beta, eps=self.eps)


class ChannelNorm:
    """LayerNorm over the channel axis of a (C,H,W) map."""

    def __init__(self, store, name, partition, c, dtype=np.float64, eps=1e-6):
        self.norm = LayerNorm(store, name, partition, c, dtype=dtype, eps=eps)

    def __call__(self, x):
        y = tk.transpose(x, (1, 2, 0))  # (H,W,C)
        y = self.norm(y)
        return tk.transpose(y, (2, 0, 1))


class ConvNeXtBlock:
    """Depthwise 7x7 + channel norm + pointwise expand/contract MLP, residual."""

    def __init__(self, store, name, partition, rng, c, expansion=4, dtype=np.float64, init="trunc"):
        self.dw = Conv2d(store, f"{name}.dwconv", partition, rng, c, c, 7, padding=3, groups=c, dtype=dtype, init=init)
        self.norm = ChannelNorm(store, f"{name}.norm", partition, c, dtype=dtype)
        self.pw1 = Conv2d(store, f"{name}.pwconv1", partition, rng, c, expansion * c, 1, dtype=dtype, init=init)
        self.pw2 = Conv2d(store, f"{name}.pwconv2", partition, rng, expansion * c, c, 1, dtype=dtype, init=init)

    def __call__(self, x):
        y = self.dw(x)
        y = self.norm(y)
        y = tk.gelu(self.pw1(y))
        y = self.pw2(y)
        return x + y


class DoubleConvBlock:
    """Two 3x3 convolutions with GELU, the classic UNet block."""

    def __init__(self, store, name, partition, rng, cin, cout, dtype=np.float64, init="trunc"):
        self.conv1 = Conv2d(store, f"{name}.conv1", partition, rng, cin, cout, 3, padding=1, dtype=dtype, init=init)
        self.conv2 = Conv2d(store, f"{name}.conv2", partition, rng, cout, cout, 3, padding=1, dtype=dtype, init=init)

    def __call__(self, x):
        return tk.gelu(self.conv2(tk.gelu(self.conv1(x))))


class Mlp:
    def __init__(self, store, name, partition, rng, d, hidden, dtype=np.float64):
        self.fc1 = Linear(store, f"{name}.fc1", partition, rng, d, hidden, dtype=dtype)
        self.fc2 = Linear(store, f"{name}.fc2", partition, rng, hidden, d, dtype=dtype)

    def __call__(self, x):
        return self.fc2(tk.gelu(self.fc1(x)))


def to_tokens(x):
    """(C,H,W) -> (H*W, C)."""
    c, h, w = x.data.shape
    return tk.transpose(tk.reshape(x, (c, h * w)), (1, 0))


def from_tokens(x, h, w):
    """(H*W, C) -> (C,H,W)."""
    c = x.data.shape[1]
    return tk.reshape(tk.transpose(x, (1, 0)), (c, h, w))


class AttentionBlock:
    """Pre-norm single-head self-attention + MLP, on a (C,H,W) map.

    window=None attends over the full token grid. With a window, attention is
    confined to non-overlapping win x win tiles; the effective window shrinks
    to min(window, H, W) so late stages with tiny maps remain valid.
    """

    def __init__(self, store, name, partition, rng, c, window=None, mlp_ratio=4, dtype=np.float64):
        self.window = window
        self.norm1 = ChannelNorm(store, f"{name}.norm1", partition, c, dtype=dtype)
        self.q = Linear(store, f"{name}.q", partition, rng, c, c, dtype=dtype)
        self.k = Linear(store, f"{name}.k", partition, rng, c, c, dtype=dtype)
        self.v = Linear(store, f"{name}.v", partition, rng, c, c, dtype=dtype)
        self.proj = Linear(store, f"{name}.proj", partition, rng, c, c, dtype=dtype)
        self.norm2 = ChannelNorm(store, f"{name}.norm2", partition, c, dtype=dtype)
        self.mlp = Mlp(store, f"{name}.mlp", partition, rng, c, mlp_ratio * c, dtype=dtype)

    def _attend(self, tile):
        c, h, w = tile.data.shape
        tokens = to_tokens(tile)
        out = tk.attention(self.q(tokens), self.k(tokens), self.v(tokens))
        return from_tokens(self.proj(out), h, w)

    def __call__(self, x):
        _, h, w = x.data.shape
        y = self.norm1(x)
        if self.window is None:
            x = x + self._attend(y)
        else:
            eff = min(self.window, h, w)
            wins, layout = tk.window_partition(y, eff)
            x = x + tk.window_merge([self._attend(t) for t in wins], layout)
        z = self.norm2(x)
        zt = to_tokens(z)
        return x + from_tokens(self.mlp(zt), h, w)


def sinusoidal_posenc(c, h, w, dtype=np.float64):
    """Parameter-free 2-D sin/cos positional grid of shape (C,H,W).

    Half the channels encode the row coordinate, half the column; channel
    count stays independent of the grid size.
    """
    if c % 4:
        raise ValueError(f"posenc channels must be divisible by 4, got {c}")
    q = c // 4
    freqs = 1.0 / (10000.0 ** (np.arange(q) / max(q, 1)))
    ys = np.arange(h)[:, None] * freqs[None, :]  # (h, q)
    xs = np.arange(w)[:, None] * freqs[None, :]  # (w, q)
    pe = np.zeros((c, h, w))
    pe[0:q] = np.sin(ys).T[:, :, None]
    pe[q : 2 * q] = np.cos(ys).T[:, :, None]
    pe[2 * q : 3 * q] = np.sin(xs).T[:, None, :]
    pe[3 * q :] = np.cos(xs).T[:, None, :]
    return pe.astype(dtype)
