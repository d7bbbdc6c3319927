"""Neural-network primitives on top of the autodiff core.

Convolutions dispatch to the selected kernel backend (numba or numpy, see
`backend`); everything else is plain vectorized numpy with hand-derived
backward passes.
"""

from __future__ import annotations

import math

import numpy as np

from . import backend
from .tensor import ShapeError, Tensor, _node, concat, getitem, matmul, reshape, transpose

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


def conv2d(x, kernel, bias=None, stride=1, padding=0, groups=1):
    """2-D cross-correlation, input (C_in,H,W), kernel (C_out,C_in/groups,kH,kW).

    Output spatial dims: floor((H + 2*padding - kH)/stride) + 1, same for W.
    """
    if x.data.ndim != 3:
        raise ShapeError(f"conv2d: input must be (C,H,W), got {x.data.shape}")
    if kernel.data.ndim != 4:
        raise ShapeError(f"conv2d: kernel must be (C_out,C_in/g,kH,kW), got {kernel.data.shape}")
    ci, h, w = x.data.shape
    co, cig, kh, kw = kernel.data.shape
    if stride < 1:
        raise ShapeError(f"conv2d: stride must be >= 1, got {stride}")
    if padding < 0:
        raise ShapeError(f"conv2d: padding must be >= 0, got {padding}")
    if ci != cig * groups:
        raise ShapeError(
            f"conv2d: kernel expects {cig * groups} input channels (groups={groups}), input has {ci}"
        )
    if co % groups:
        raise ShapeError(f"conv2d: C_out={co} not divisible by groups={groups}")
    if kh > h + 2 * padding or kw > w + 2 * padding:
        raise ShapeError(
            f"conv2d: kernel ({kh}x{kw}) larger than padded input ({h + 2 * padding}x{w + 2 * padding})"
        )
    if bias is not None and bias.data.shape != (co,):
        raise ShapeError(f"conv2d: bias must have shape ({co},), got {bias.data.shape}")

    pointwise = kh == 1 and kw == 1 and stride == 1 and padding == 0 and groups == 1
    if pointwise:
        # a 1x1 conv is a channel matmul; BLAS beats the loop kernels here
        out = (kernel.data.reshape(co, ci) @ x.data.reshape(ci, h * w)).reshape(co, h, w)
    else:
        out = backend.conv2d_forward(x.data, kernel.data, stride, padding, groups)
    if bias is not None:
        out += bias.data[:, None, None]

    parents = (x, kernel) if bias is None else (x, kernel, bias)

    def bwd():
        g = res.grad
        if pointwise:
            g2 = g.reshape(co, h * w)
            if x.requires_grad:
                x._accum((kernel.data.reshape(co, ci).T @ g2).reshape(ci, h, w))
            if kernel.requires_grad:
                kernel._accum((g2 @ x.data.reshape(ci, h * w).T).reshape(co, ci, 1, 1))
        else:
            if x.requires_grad:
                x._accum(backend.conv2d_grad_input(g, kernel.data, stride, padding, h, w, groups))
            if kernel.requires_grad:
                kernel._accum(backend.conv2d_grad_kernel(g, x.data, stride, padding, kh, kw, groups))
        if bias is not None and bias.requires_grad:
            bias._accum(g.sum(axis=(1, 2)))

    res = _node(out, parents, bwd)
    return res


def linear(x, weight, bias=None):
    """Affine map on the trailing dimension: y = x @ weight.T + bias."""
    if weight.data.ndim != 2:
        raise ShapeError(f"linear: weight must be (D_out,D_in), got {weight.data.shape}")
    dout, din = weight.data.shape
    if x.data.ndim < 1 or x.data.shape[-1] != din:
        raise ShapeError(f"linear: trailing dim of {x.data.shape} does not match D_in={din}")
    if bias is not None and bias.data.shape != (dout,):
        raise ShapeError(f"linear: bias must have shape ({dout},), got {bias.data.shape}")

    out = x.data @ weight.data.T
    if bias is not None:
        out += bias.data

    parents = (x, weight) if bias is None else (x, weight, bias)

    def bwd():
        g = res.grad
        if x.requires_grad:
            x._accum(g @ weight.data)
        if weight.requires_grad:
            g2 = g.reshape(-1, dout)
            x2 = x.data.reshape(-1, din)
            weight._accum(g2.T @ x2)
        if bias is not None and bias.requires_grad:
            bias._accum(g.reshape(-1, dout).sum(axis=0))

    res = _node(out, parents, bwd)
    return res


def layernorm(x, gamma, beta, eps=1e-6):
    """Normalize the trailing dimension to mean 0 / var 1, then scale and shift."""
    d = x.data.shape[-1]
    if gamma.data.shape != (d,) or beta.data.shape != (d,):
        raise ShapeError(
            f"layernorm: gamma/beta must have shape ({d},), got {gamma.data.shape}/{beta.data.shape}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def bwd():
        g = res.grad
        if beta.requires_grad:
            beta._accum(g.reshape(-1, d).sum(axis=0))
        if gamma.requires_grad:
            gamma._accum((g * xhat).reshape(-1, d).sum(axis=0))
        if x.requires_grad:
            gx = g * gamma.data
            m1 = gx.mean(axis=-1, keepdims=True)
            m2 = (gx * xhat).mean(axis=-1, keepdims=True)
            x._accum(inv * (gx - m1 - xhat * m2))

    res = _node(out, (x, gamma, beta), bwd)
    return res


def gelu(x):
    """GELU, tanh approximation."""
    xd = x.data
    inner = _GELU_C * (xd + _GELU_A * xd**3)
    th = np.tanh(inner)

    def bwd():
        if x.requires_grad:
            sech2 = 1.0 - th * th
            dinner = _GELU_C * (1.0 + 3.0 * _GELU_A * xd * xd)
            x._accum(res.grad * (0.5 * (1.0 + th) + 0.5 * xd * sech2 * dinner))

    res = _node(0.5 * xd * (1.0 + th), (x,), bwd)
    return res


def softmax(x, axis=-1):
    """Numerically stable softmax along `axis`."""
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def bwd():
        if x.requires_grad:
            g = res.grad
            x._accum(y * (g - (g * y).sum(axis=axis, keepdims=True)))

    res = _node(y, (x,), bwd)
    return res


def attention(q, k, v):
    """Scaled dot-product attention: softmax(q k^T / sqrt(D)) v, inputs (N,D)."""
    if q.data.ndim != 2 or k.data.ndim != 2 or v.data.ndim != 2:
        raise ShapeError("attention: q, k, v must be 2-D (N,D)")
    if not (q.data.shape == k.data.shape == v.data.shape):
        raise ShapeError(
            f"attention: q/k/v shapes must match, got {q.data.shape}/{k.data.shape}/{v.data.shape}"
        )
    d = q.data.shape[1]
    logits = matmul(q, transpose(k, (1, 0))) * (1.0 / math.sqrt(d))
    return matmul(softmax(logits, axis=-1), v)


def bilinear_upsample2x(x):
    """Double both spatial dimensions of (C,H,W) by bilinear interpolation.

    Sample positions follow the align-corners-false convention: output pixel i
    reads the source at (i + 0.5)/2 - 0.5, clamped at the edges.
    """
    if x.data.ndim != 3:
        raise ShapeError(f"bilinear_upsample2x: input must be (C,H,W), got {x.data.shape}")
    _, h, w = x.data.shape
    ry = _interp_matrix(h, x.data.dtype)
    rx = _interp_matrix(w, x.data.dtype)
    out = np.einsum("ij,cjk,lk->cil", ry, x.data, rx, optimize=True)

    def bwd():
        if x.requires_grad:
            x._accum(np.einsum("ij,cik,kl->cjl", ry, res.grad, rx, optimize=True))

    res = _node(out, (x,), bwd)
    return res


def _interp_matrix(n, dtype):
    """Dense (2n, n) row-interpolation matrix for 2x bilinear upsampling."""
    m = np.zeros((2 * n, n), dtype=dtype)
    for i in range(2 * n):
        src = (i + 0.5) / 2.0 - 0.5
        lo = math.floor(src)
        t = src - lo
        lo_c = min(max(lo, 0), n - 1)
        hi_c = min(max(lo + 1, 0), n - 1)
        m[i, lo_c] += 1.0 - t
        m[i, hi_c] += t
    return m


def transposed_conv2x(x, kernel, bias=None):
    """Stride-2 transposed convolution with a 2x2 kernel: (C,H,W) -> (C',2H,2W).

    Kernel layout (C_in, C_out, 2, 2). Strides equal the kernel size, so each
    input pixel scatters into a disjoint 2x2 output block.
    """
    if x.data.ndim != 3:
        raise ShapeError(f"transposed_conv2x: input must be (C,H,W), got {x.data.shape}")
    if kernel.data.ndim != 4 or kernel.data.shape[2:] != (2, 2):
        raise ShapeError(f"transposed_conv2x: kernel must be (C_in,C_out,2,2), got {kernel.data.shape}")
    ci, h, w = x.data.shape
    if kernel.data.shape[0] != ci:
        raise ShapeError(f"transposed_conv2x: kernel C_in={kernel.data.shape[0]} vs input C={ci}")
    co = kernel.data.shape[1]
    if bias is not None and bias.data.shape != (co,):
        raise ShapeError(f"transposed_conv2x: bias must have shape ({co},), got {bias.data.shape}")

    # out[o, 2i+u, 2j+v] = sum_c x[c,i,j] * k[c,o,u,v]
    out = np.einsum("chw,couv->ohuwv", x.data, kernel.data, optimize=True).reshape(co, 2 * h, 2 * w)
    if bias is not None:
        out += bias.data[:, None, None]

    parents = (x, kernel) if bias is None else (x, kernel, bias)

    def bwd():
        g = res.grad.reshape(co, h, 2, w, 2)
        if x.requires_grad:
            x._accum(np.einsum("ohuwv,couv->chw", g, kernel.data, optimize=True))
        if kernel.requires_grad:
            kernel._accum(np.einsum("ohuwv,chw->couv", g, x.data, optimize=True))
        if bias is not None and bias.requires_grad:
            bias._accum(res.grad.sum(axis=(1, 2)))

    res = _node(out, parents, bwd)
    return res


class WindowLayout:
    """Descriptor returned by window_partition; feeds window_merge."""

    __slots__ = ("channels", "height", "width", "win")

    def __init__(self, channels, height, width, win):
        self.channels = channels
        self.height = height
        self.width = width
        self.win = win

    @property
    def grid(self):
        return self.height // self.win, self.width // self.win


def window_partition(x, win):
    """Split (C,H,W) into a row-major list of (C,win,win) windows.

    H and W must be divisible by `win`; window_merge restores the input
    bit-exactly.
    """
    if x.data.ndim != 3:
        raise ShapeError(f"window_partition: input must be (C,H,W), got {x.data.shape}")
    c, h, w = x.data.shape
    if win < 1 or h % win or w % win:
        raise ShapeError(f"window_partition: win={win} must divide H={h} and W={w}")
    gh, gw = h // win, w // win
    grid = reshape(x, (c, gh, win, gw, win))
    grid = transpose(grid, (1, 3, 0, 2, 4))  # (gh, gw, C, win, win)
    batched = reshape(grid, (gh * gw, c, win, win))
    windows = [getitem(batched, i) for i in range(gh * gw)]
    return windows, WindowLayout(c, h, w, win)


def window_merge(windows, layout):
    """Inverse of window_partition."""
    gh, gw = layout.grid
    if len(windows) != gh * gw:
        raise ShapeError(f"window_merge: expected {gh * gw} windows, got {len(windows)}")
    for t in windows:
        if t.data.shape != (layout.channels, layout.win, layout.win):
            raise ShapeError(
                f"window_merge: window shape {t.data.shape} does not match layout "
                f"({layout.channels},{layout.win},{layout.win})"
            )
    from .tensor import stack

    batched = stack(windows, axis=0)  # (gh*gw, C, win, win)
    grid = reshape(batched, (gh, gw, layout.channels, layout.win, layout.win))
    grid = transpose(grid, (2, 0, 3, 1, 4))  # (C, gh, win, gw, win)
    return reshape(grid, (layout.channels, layout.height, layout.width))


def conv_out_hw(h, w, kh, kw, stride, padding):
    """Closed-form conv2d output spatial dims."""
    return (h + 2 * padding - kh) // stride + 1, (w + 2 * padding - kw) // stride + 1
