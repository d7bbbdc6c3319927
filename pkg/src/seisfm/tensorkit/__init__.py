"""Tensor arithmetic with reverse-mode autodiff and neural primitives."""

from .backend import backend_name, use_backend
from .gradcheck import grad_check
from .nn import (
    attention,
    bilinear_upsample2x,
    conv2d,
    conv_out_hw,
    gelu,
    layernorm,
    linear,
    softmax,
    transposed_conv2x,
    window_merge,
    window_partition,
    WindowLayout,
)
from .tensor import (
    ShapeError,
    Tensor,
    backward,
    concat,
    getitem,
    grad_enabled,
    matmul,
    no_grad,
    reshape,
    stack,
    transpose,
)

__all__ = [
    "ShapeError",
    "Tensor",
    "WindowLayout",
    "attention",
    "backend_name",
    "backward",
    "bilinear_upsample2x",
    "concat",
    "conv2d",
    "conv_out_hw",
    "gelu",
    "getitem",
    "grad_check",
    "grad_enabled",
    "layernorm",
    "linear",
    "matmul",
    "no_grad",
    "reshape",
    "softmax",
    "stack",
    "transpose",
    "transposed_conv2x",
    "use_backend",
    "window_merge",
    "window_partition",
]
