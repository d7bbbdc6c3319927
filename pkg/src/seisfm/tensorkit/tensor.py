"""Dense tensors with reverse-mode automatic differentiation.

The graph is implicit: every tensor produced by an operation keeps references
to its parents and a closure that routes the output gradient to them.
`backward` topologically sorts that linkage and runs the closures in reverse.

Shape discipline is strict on purpose: elementwise operations require
identical shapes (scalars excepted); only the bias-add inside conv/linear
broadcasts. Mismatches raise ShapeError early instead of silently
broadcasting through decoder plumbing.
"""

from __future__ import annotations

import numpy as np

_FLOAT_DTYPES = (np.float32, np.float64)


class ShapeError(ValueError):
    """Raised when operand shapes or dtypes are incompatible."""


_grad_enabled = True


class no_grad:
    """Context manager that disables graph recording (inference mode)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def grad_enabled():
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def _accum(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data)

    def item(self):
        return float(self.data.reshape(-1)[0])

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self):
        return tsum(self)

    def mean(self):
        return tmean(self)

    def abs(self):
        return tabs(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)

    def backward(self):
        backward(self)


def _node(data, parents, bwd):
    """Wrap an op result; records the graph edge only when grads are live."""
    if not _grad_enabled or not any(p.requires_grad for p in parents):
        return Tensor(data)
    out = Tensor(data, requires_grad=True)
    out._parents = tuple(parents)
    out._backward = bwd
    return out


def _as_tensor(x, like):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.dtype))


def _check_match(a, b, op):
    if a.data.shape != b.data.shape:
        raise ShapeError(f"{op}: shape mismatch {a.data.shape} vs {b.data.shape}")
    if a.data.dtype != b.data.dtype:
        raise ShapeError(f"{op}: dtype mismatch {a.data.dtype} vs {b.data.dtype}")


def _is_scalar(x):
    return isinstance(x, (int, float)) or (isinstance(x, np.generic) and np.isscalar(x))


# -- elementwise ops ---------------------------------------------------------


def add(a, b):
    if _is_scalar(b):
        out = a.data + a.dtype.type(b)

        def bwd():
            if a.requires_grad:
                a._accum(res.grad)

        res = _node(out, (a,), bwd)
        return res
    if _is_scalar(a):
        return add(b, a)
    _check_match(a, b, "add")

    def bwd():
        if a.requires_grad:
            a._accum(res.grad)
        if b.requires_grad:
            b._accum(res.grad)

    res = _node(a.data + b.data, (a, b), bwd)
    return res


def neg(a):
    def bwd():
        if a.requires_grad:
            a._accum(-res.grad)

    res = _node(-a.data, (a,), bwd)
    return res


def sub(a, b):
    if _is_scalar(b):
        return add(a, -b)
    _check_match(a, b, "sub")

    def bwd():
        if a.requires_grad:
            a._accum(res.grad)
        if b.requires_grad:
            b._accum(-res.grad)

    res = _node(a.data - b.data, (a, b), bwd)
    return res


def mul(a, b):
    if _is_scalar(b):
        s = a.dtype.type(b)

        def bwd():
            if a.requires_grad:
                a._accum(res.grad * s)

        res = _node(a.data * s, (a,), bwd)
        return res
    if _is_scalar(a):
        return mul(b, a)
    _check_match(a, b, "mul")

    def bwd():
        if a.requires_grad:
            a._accum(res.grad * b.data)
        if b.requires_grad:
            b._accum(res.grad * a.data)

    res = _node(a.data * b.data, (a, b), bwd)
    return res


def div(a, b):
    if _is_scalar(b):
        return mul(a, 1.0 / b)
    _check_match(a, b, "div")
    inv = 1.0 / b.data

    def bwd():
        if a.requires_grad:
            a._accum(res.grad * inv)
        if b.requires_grad:
            b._accum(-res.grad * a.data * inv * inv)

    res = _node(a.data * inv, (a, b), bwd)
    return res


def tabs(a):
    sign = np.sign(a.data)  # subgradient at 0 is 0

    def bwd():
        if a.requires_grad:
            a._accum(res.grad * sign)

    res = _node(np.abs(a.data), (a,), bwd)
    return res


def tsum(a):
    def bwd():
        if a.requires_grad:
            a._accum(np.full_like(a.data, res.grad))

    res = _node(a.data.sum(), (a,), bwd)
    return res


def tmean(a):
    n = a.data.size

    def bwd():
        if a.requires_grad:
            a._accum(np.full_like(a.data, res.grad / n))

    res = _node(a.data.mean(), (a,), bwd)
    return res


# -- structural ops ----------------------------------------------------------


def reshape(a, shape):
    old = a.data.shape

    def bwd():
        if a.requires_grad:
            a._accum(res.grad.reshape(old))

    res = _node(a.data.reshape(shape), (a,), bwd)
    return res


def transpose(a, axes):
    inv = tuple(np.argsort(axes))

    def bwd():
        if a.requires_grad:
            a._accum(res.grad.transpose(inv))

    res = _node(np.ascontiguousarray(a.data.transpose(axes)), (a,), bwd)
    return res


def getitem(a, idx):
    def bwd():
        if a.requires_grad:
            g = np.zeros_like(a.data)
            g[idx] = res.grad
            a._accum(g)

    res = _node(np.ascontiguousarray(a.data[idx]), (a,), bwd)
    return res


def concat(tensors, axis=0):
    tensors = list(tensors)
    base = tensors[0]
    for t in tensors[1:]:
        if t.data.ndim != base.data.ndim or t.data.dtype != base.data.dtype:
            raise ShapeError("concat: rank or dtype mismatch")
        for ax in range(base.data.ndim):
            if ax != axis and t.data.shape[ax] != base.data.shape[ax]:
                raise ShapeError(
                    f"concat: shape mismatch on axis {ax}: {t.data.shape} vs {base.data.shape}"
                )
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd():
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * res.grad.ndim
                sl[axis] = slice(lo, hi)
                t._accum(res.grad[tuple(sl)])

    res = _node(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), bwd)
    return res


def stack(tensors, axis=0):
    expanded = [reshape(t, t.data.shape[:axis] + (1,) + t.data.shape[axis:]) for t in tensors]
    return concat(expanded, axis=axis)


# -- matmul ------------------------------------------------------------------


def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul: expected 2-D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: inner dims differ, {a.data.shape} @ {b.data.shape}")

    def bwd():
        if a.requires_grad:
            a._accum(res.grad @ b.data.T)
        if b.requires_grad:
            b._accum(a.data.T @ res.grad)

    res = _node(a.data @ b.data, (a, b), bwd)
    return res


# -- backward ----------------------------------------------------------------


def _topo(root):
    order = []
    visited = set()
    stack = [(root, iter(root._parents))]
    visited.add(id(root))
    while stack:
        node, it = stack[-1]
        advanced = False
        for p in it:
            if id(p) not in visited and p.requires_grad:
                visited.add(id(p))
                stack.append((p, iter(p._parents)))
                advanced = True
                break
        if not advanced:
            order.append(node)
            stack.pop()
    return order


def backward(loss):
    """Populate .grad on every requires_grad tensor reachable from `loss`."""
    if not isinstance(loss, Tensor):
        raise TypeError("backward expects a Tensor")
    if loss.data.size != 1:
        raise ShapeError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        raise ValueError("loss does not require grad; nothing to differentiate")
    order = _topo(loss)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None:
            node._backward()
