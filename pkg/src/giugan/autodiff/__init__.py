"""Reverse-mode automatic differentiation on float64 numpy arrays."""

from . import ops
from .gradcheck import GradCheckReport, NonDeterministicError, grad_check
from .ops import (
    broadcast_to,
    col2im,
    concat,
    div,
    elementwise,
    exp,
    im2col,
    leaky_relu,
    log,
    matmul,
    mul,
    pad,
    permute,
    reduce,
    relu,
    reshape,
    sigmoid,
    slice_,
    sqrt,
    square,
    sum_to,
    tanh,
)
from .tensor import (
    Function,
    GraphNode,
    Tensor,
    as_tensor,
    backward,
    grad,
    is_grad_enabled,
    no_grad,
    set_grad_enabled,
)

__all__ = [
    "Function",
    "GradCheckReport",
    "GraphNode",
    "NonDeterministicError",
    "Tensor",
    "as_tensor",
    "backward",
    "broadcast_to",
    "col2im",
    "concat",
    "div",
    "elementwise",
    "exp",
    "grad",
    "grad_check",
    "im2col",
    "is_grad_enabled",
    "leaky_relu",
    "log",
    "matmul",
    "mul",
    "no_grad",
    "ops",
    "pad",
    "permute",
    "reduce",
    "relu",
    "reshape",
    "set_grad_enabled",
    "sigmoid",
    "slice_",
    "sqrt",
    "square",
    "sum_to",
    "tanh",
]
