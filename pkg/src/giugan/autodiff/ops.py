"""Differentiable operations.

Broadcasting is restricted to singleton expansion between operands of equal
rank; Python scalars are accepted as constants.
"""

from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np

from .. import kernels
from .tensor import Function, Tensor

Operand = Union[Tensor, float, int, np.ndarray]


# -- helpers -------------------------------------------------------------


def _lift(x: Operand, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape((1,) * like.ndim)
    return Tensor(arr)


def _pair(a: Operand, b: Operand) -> tuple[Tensor, Tensor]:
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        raise TypeError("at least one operand must be a Tensor")
    if isinstance(a, Tensor):
        b = _lift(b, a)
    else:
        a = _lift(a, b)
    return a, b


def broadcast_shape(sa: tuple[int, ...], sb: tuple[int, ...]) -> tuple[int, ...]:
    if len(sa) != len(sb):
        raise ValueError(f"rank mismatch: {sa} vs {sb} (no implicit rank promotion)")
    out = []
    for da, db in zip(sa, sb):
        if da != db and da != 1 and db != 1:
            raise ValueError(f"shapes {sa} and {sb} are not broadcastable")
        out.append(max(da, db))
    return tuple(out)


def _unbroadcast(g: Tensor, shape: tuple[int, ...]) -> Tensor:
    return g if g.shape == shape else sum_to(g, shape)


def _norm_axes(axes, ndim: int) -> tuple[int, ...]:
    if axes is None:
        return tuple(range(ndim))
    if isinstance(axes, int):
        axes = (axes,)
    out = []
    for a in axes:
        if not -ndim <= a < ndim:
            raise ValueError(f"axis {a} out of range for rank {ndim}")
        out.append(a % ndim)
    return tuple(sorted(set(out)))


# -- broadcasting primitives ------------------------------------------------


class BroadcastTo(Function):
    def forward(self, a, shape):
        broadcast_shape(a.shape, shape)
        self.in_shape = a.shape
        return np.ascontiguousarray(np.broadcast_to(a, shape))

    def backward(self, g):
        return (sum_to(g, self.in_shape),)


class SumTo(Function):
    def forward(self, a, shape):
        self.in_shape = a.shape
        axes = tuple(i for i, (da, ds) in enumerate(zip(a.shape, shape)) if ds == 1 and da != 1)
        return a.sum(axis=axes, keepdims=True) if axes else a.copy()

    def backward(self, g):
        return (broadcast_to(g, self.in_shape),)


def broadcast_to(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    return a if a.shape == shape else BroadcastTo.apply(a, shape=shape)


def sum_to(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    return a if a.shape == shape else SumTo.apply(a, shape=shape)


# -- binary elementwise -------------------------------------------------------


class Add(Function):
    def forward(self, a, b):
        broadcast_shape(a.shape, b.shape)
        return a + b

    def backward(self, g):
        a, b = self.inputs
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)


class Sub(Function):
    def forward(self, a, b):
        broadcast_shape(a.shape, b.shape)
        return a - b

    def backward(self, g):
        a, b = self.inputs
        return _unbroadcast(g, a.shape), _unbroadcast(neg(g), b.shape)


class Mul(Function):
    def forward(self, a, b):
        broadcast_shape(a.shape, b.shape)
        return a * b

    def backward(self, g):
        a, b = self.inputs
        ga = _unbroadcast(g * b, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a, b.shape) if b.requires_grad else None
        return ga, gb


class Div(Function):
    def forward(self, a, b):
        broadcast_shape(a.shape, b.shape)
        if np.any(b == 0):
            raise ZeroDivisionError("division by a tensor containing zeros")
        return a / b

    def backward(self, g):
        a, b = self.inputs
        ga = _unbroadcast(g / b, a.shape) if a.requires_grad else None
        gb = _unbroadcast(neg(g * a / (b * b)), b.shape) if b.requires_grad else None
        return ga, gb


def add(a: Operand, b: Operand) -> Tensor:
    return Add.apply(*_pair(a, b))


def sub(a: Operand, b: Operand) -> Tensor:
    return Sub.apply(*_pair(a, b))


def mul(a: Operand, b: Operand) -> Tensor:
    return Mul.apply(*_pair(a, b))


def div(a: Operand, b: Operand) -> Tensor:
    return Div.apply(*_pair(a, b))


# -- unary elementwise --------------------------------------------------------


class Neg(Function):
    def forward(self, a):
        return -a

    def backward(self, g):
        return (neg(g),)


class ReLU(Function):
    def forward(self, a):
        # left derivative at 0
        self.mask = (a > 0).astype(np.float64)
        return a * self.mask

    def backward(self, g):
        return (g * Tensor(self.mask),)


class LeakyReLU(Function):
    def forward(self, a, slope):
        self.slope_map = np.where(a > 0, 1.0, slope)
        return a * self.slope_map

    def backward(self, g):
        return (g * Tensor(self.slope_map),)


class Sigmoid(Function):
    def forward(self, a):
        out = np.empty_like(a)
        pos = a >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
        e = np.exp(a[~pos])
        out[~pos] = e / (1.0 + e)
        return out

    def backward(self, g):
        y = self.output
        return (g * y * (1.0 - y),)


class Tanh(Function):
    def forward(self, a):
        return np.tanh(a)

    def backward(self, g):
        y = self.output
        return (g * (1.0 - y * y),)


class Square(Function):
    def forward(self, a):
        return a * a

    def backward(self, g):
        (a,) = self.inputs
        return (g * a * 2.0,)


class Sqrt(Function):
    def forward(self, a):
        if np.any(a < 0):
            raise ValueError("sqrt of a negative value")
        return np.sqrt(a)

    def backward(self, g):
        # sqrt is not differentiable at 0; use 0 there so a zero norm stays finite
        return (g * 0.5 * safe_reciprocal(self.output),)


class SafeReciprocal(Function):
    def forward(self, a):
        self.nz = a != 0
        return np.divide(1.0, a, out=np.zeros_like(a), where=self.nz)

    def backward(self, g):
        y = self.output
        return (neg(g * y * y),)


class Exp(Function):
    def forward(self, a):
        return np.exp(a)

    def backward(self, g):
        return (g * self.output,)


class Log(Function):
    def forward(self, a):
        if np.any(a <= 0):
            raise ValueError("log of a non-positive value")
        return np.log(a)

    def backward(self, g):
        (a,) = self.inputs
        return (g / a,)


def neg(a: Tensor) -> Tensor:
    return Neg.apply(a)


def relu(a: Tensor) -> Tensor:
    return ReLU.apply(a)


def leaky_relu(a: Tensor, slope: float = 0.1) -> Tensor:
    return LeakyReLU.apply(a, slope=slope)


def sigmoid(a: Tensor) -> Tensor:
    return Sigmoid.apply(a)


def tanh(a: Tensor) -> Tensor:
    return Tanh.apply(a)


def square(a: Tensor) -> Tensor:
    return Square.apply(a)


def sqrt(a: Tensor) -> Tensor:
    return Sqrt.apply(a)


def safe_reciprocal(a: Tensor) -> Tensor:
    """1/a with 0 mapped to 0."""
    return SafeReciprocal.apply(a)


def exp(a: Tensor) -> Tensor:
    return Exp.apply(a)


def log(a: Tensor) -> Tensor:
    return Log.apply(a)


_UNARY = {
    "neg": neg,
    "relu": relu,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "square": square,
    "sqrt": sqrt,
    "exp": exp,
    "log": log,
}
_BINARY = {"add": add, "sub": sub, "mul": mul, "div": div}


def elementwise(op: str, a: Operand, b: Optional[Operand] = None, slope: float = 0.1) -> Tensor:
    """Dispatch by name; ``leaky_relu`` takes ``slope``."""
    if op in _BINARY:
        if b is None:
            raise ValueError(f"{op} needs two operands")
        return _BINARY[op](a, b)
    if op == "leaky_relu":
        return leaky_relu(a, slope)
    if op in _UNARY:
        return _UNARY[op](a)
    raise ValueError(f"unknown elementwise op {op!r}")


# -- linear algebra -----------------------------------------------------------


class MatMul(Function):
    def forward(self, a, b):
        if a.ndim != 2 or b.ndim != 2:
            raise ValueError(f"matmul expects 2-d operands, got {a.shape} and {b.shape}")
        if a.shape[1] != b.shape[0]:
            raise ValueError(f"inner dimensions differ: {a.shape} @ {b.shape}")
        return a @ b

    def backward(self, g):
        a, b = self.inputs
        ga = matmul(g, permute(b, (1, 0))) if a.requires_grad else None
        gb = matmul(permute(a, (1, 0)), g) if b.requires_grad else None
        return ga, gb


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return MatMul.apply(a, b)


# -- reductions -----------------------------------------------------------------


class Sum(Function):
    def forward(self, a, axes, keepdims):
        self.in_shape = a.shape
        self.axes = axes
        self.keepdims = keepdims
        return np.asarray(a.sum(axis=axes, keepdims=keepdims))

    def backward(self, g):
        if not self.keepdims:
            g = reshape(g, _kept_shape(self.in_shape, self.axes))
        return (broadcast_to(g, self.in_shape),)


class Max(Function):
    def forward(self, a, axes, keepdims):
        self.in_shape = a.shape
        self.axes = axes
        self.keepdims = keepdims
        m = a.max(axis=axes, keepdims=True)
        hit = (a == m).astype(np.float64)
        # ties share the gradient equally
        self.mask = hit / hit.sum(axis=axes, keepdims=True)
        return m if keepdims else np.asarray(m.reshape(_dropped_shape(a.shape, axes)))

    def backward(self, g):
        if not self.keepdims:
            g = reshape(g, _kept_shape(self.in_shape, self.axes))
        return (broadcast_to(g, self.in_shape) * Tensor(self.mask),)


def _kept_shape(shape, axes):
    return tuple(1 if i in axes else d for i, d in enumerate(shape))


def _dropped_shape(shape, axes):
    return tuple(d for i, d in enumerate(shape) if i not in axes)


def reduce(op: str, a: Tensor, axes=None, keepdims: bool = False) -> Tensor:
    """sum / mean / max over ``axes`` (None = all).  An empty axis set is the identity."""
    axes = _norm_axes(axes, a.ndim)
    if len(axes) == 0:
        return a
    if op == "sum":
        return Sum.apply(a, axes=axes, keepdims=keepdims)
    if op == "mean":
        count = int(np.prod([a.shape[i] for i in axes]))
        return Sum.apply(a, axes=axes, keepdims=keepdims) * (1.0 / count)
    if op == "max":
        return Max.apply(a, axes=axes, keepdims=keepdims)
    raise ValueError(f"unknown reduction {op!r}")


# -- shape manipulation -------------------------------------------------------


class Reshape(Function):
    def forward(self, a, shape):
        self.in_shape = a.shape
        if int(np.prod(shape)) != a.size or any(d < 0 for d in shape):
            raise ValueError(f"cannot reshape {a.shape} into {shape}")
        return a.reshape(shape)

    def backward(self, g):
        return (reshape(g, self.in_shape),)


class Permute(Function):
    def forward(self, a, axes):
        if sorted(axes) != list(range(a.ndim)):
            raise ValueError(f"invalid permutation {axes} for rank {a.ndim}")
        self.axes = axes
        return np.ascontiguousarray(a.transpose(axes))

    def backward(self, g):
        return (permute(g, tuple(np.argsort(self.axes))),)


class Pad(Function):
    def forward(self, a, widths):
        self.widths = widths
        return np.pad(a, widths)

    def backward(self, g):
        index = tuple(slice(lo, g.shape[i] - hi) for i, (lo, hi) in enumerate(self.widths))
        return (slice_(g, index),)


class Slice(Function):
    def forward(self, a, index):
        self.in_shape = a.shape
        self.index = index
        return np.array(a[index], dtype=np.float64)

    def backward(self, g):
        return (Embed.apply(g, shape=self.in_shape, index=self.index),)


class Embed(Function):
    """Scatter ``g`` into zeros of ``shape`` at ``index`` (adjoint of slicing)."""

    def forward(self, g, shape, index):
        self.index = index
        out = np.zeros(shape)
        out[index] = g
        return out

    def backward(self, g):
        return (slice_(g, self.index),)


class Concat(Function):
    def forward(self, *arrays, axis):
        self.axis = axis
        self.bounds = np.cumsum([0] + [a.shape[axis] for a in arrays])
        return np.concatenate(arrays, axis=axis)

    def backward(self, g):
        out = []
        for i, t in enumerate(self.inputs):
            if not t.requires_grad:
                out.append(None)
                continue
            index = [slice(None)] * g.ndim
            index[self.axis] = slice(int(self.bounds[i]), int(self.bounds[i + 1]))
            out.append(slice_(g, tuple(index)))
        return tuple(out)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(d) for d in shape)
    if -1 in shape:
        known = int(np.prod([d for d in shape if d != -1]))
        shape = tuple(a.size // known if d == -1 else d for d in shape)
    return a if a.shape == shape else Reshape.apply(a, shape=shape)


def permute(a: Tensor, axes: Sequence[int]) -> Tensor:
    return Permute.apply(a, axes=tuple(int(x) for x in axes))


def pad(a: Tensor, widths: Sequence[tuple[int, int]]) -> Tensor:
    """Zero padding; ``widths`` has one (before, after) pair per axis."""
    widths = tuple((int(lo), int(hi)) for lo, hi in widths)
    if len(widths) != a.ndim or any(lo < 0 or hi < 0 for lo, hi in widths):
        raise ValueError(f"bad pad widths {widths} for rank {a.ndim}")
    return Pad.apply(a, widths=widths)


def slice_(a: Tensor, index) -> Tensor:
    if not isinstance(index, tuple):
        index = (index,)
    for ix in index:
        if not isinstance(ix, (slice, int, np.integer)):
            raise TypeError("only basic integer/slice indexing is supported")
    for ax, ix in enumerate(index):
        if isinstance(ix, (int, np.integer)) and not -a.shape[ax] <= ix < a.shape[ax]:
            raise IndexError(f"index {ix} out of bounds for axis {ax} of size {a.shape[ax]}")
    return Slice.apply(a, index=index)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ValueError("concat needs at least one tensor")
    axis = axis % tensors[0].ndim
    return Concat.apply(*tensors, axis=axis)


# -- neighborhood gather ------------------------------------------------------


class Im2Col(Function):
    def forward(self, x, k, stride, pad):
        self.k, self.stride, self.pad = k, stride, pad
        self.hw = x.shape[2:]
        return kernels.im2col(x, k, stride, pad)

    def backward(self, g):
        return (Col2Im.apply(g, hw=self.hw, stride=self.stride, pad=self.pad),)


class Col2Im(Function):
    def forward(self, cols, hw, stride, pad):
        self.k, self.stride, self.pad = cols.shape[-1], stride, pad
        return kernels.col2im(cols, hw[0], hw[1], stride, pad)

    def backward(self, g):
        return (Im2Col.apply(g, k=self.k, stride=self.stride, pad=self.pad),)


def im2col(x: Tensor, k: int, stride: int = 1, pad: int = 0) -> Tensor:
    """(N, C, H, W) -> (N, Ho, Wo, C, K, K) patch tensor."""
    return Im2Col.apply(x, k=int(k), stride=int(stride), pad=int(pad))


def col2im(cols: Tensor, hw: tuple[int, int], stride: int = 1, pad: int = 0) -> Tensor:
    """Adjoint of :func:`im2col`."""
    return Col2Im.apply(cols, hw=tuple(hw), stride=int(stride), pad=int(pad))
