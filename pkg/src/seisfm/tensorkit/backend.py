"""Conv-kernel backend selection.

The env flag SEISFM_BACKEND picks the implementation at import time:
"numba" (jitted loops, the default when numba imports) or "numpy"
(vectorized fallback). `use_backend` switches at runtime, mainly for tests
and the kernel benchmark.
"""

import os

from . import _conv_numpy

_VALID = ("numba", "numpy")


def _load(name):
    if name == "numpy":
        return _conv_numpy
    from . import _conv_numba

    return _conv_numba


def _initial():
    flag = os.environ.get("SEISFM_BACKEND", "").strip().lower()
    if flag and flag not in _VALID:
        raise ValueError(f"SEISFM_BACKEND must be one of {_VALID}, got {flag!r}")
    if flag == "numpy":
        return "numpy", _conv_numpy
    try:
        return "numba", _load("numba")
    except ImportError:
        if flag == "numba":
            raise
        return "numpy", _conv_numpy


_name, _impl = _initial()


def backend_name():
    return _name


def use_backend(name):
    """Switch kernel backend; returns the previously active name."""
    global _name, _impl
    if name not in _VALID:
        raise ValueError(f"unknown backend {name!r}")
    prev = _name
    _name, _impl = name, _load(name)
    return prev


def conv2d_forward(x, k, stride, pad, groups):
    return _impl.conv2d_forward(x, k, stride, pad, groups)


def conv2d_grad_input(dy, k, stride, pad, h, w, groups):
    return _impl.conv2d_grad_input(dy, k, stride, pad, h, w, groups)


def conv2d_grad_kernel(dy, x, stride, pad, kh, kw, groups):
    return _impl.conv2d_grad_kernel(dy, x, stride, pad, kh, kw, groups)
