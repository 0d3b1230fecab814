"""Tensor and graph-node core of the reverse-mode engine.

Every backward rule is written with differentiable ``Tensor`` operations, so
running a backward pass with ``create_graph=True`` records a new graph that
can itself be differentiated.
"""

from __future__ import annotations

import contextlib
import weakref
from typing import Any, Iterable, Iterator, Optional, Sequence, Union

import numpy as np

ArrayLike = Union[np.ndarray, float, int, Sequence]

_grad_enabled = True


def is_grad_enabled() -> bool:
    return _grad_enabled


@contextlib.contextmanager
def set_grad_enabled(mode: bool) -> Iterator[None]:
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = mode
    try:
        yield
    finally:
        _grad_enabled = prev


def no_grad():
    return set_grad_enabled(False)


class Function:
    """One vertex of the computation graph.

    Subclasses implement ``forward`` on raw arrays and ``backward`` on the
    upstream gradient Tensor, returning one gradient (or None) per input.
    """

    def __init__(self, *inputs: "Tensor"):
        self.inputs = inputs
        self._output: Optional[weakref.ReferenceType] = None

    @property
    def op(self) -> str:
        return type(self).__name__

    @property
    def output(self) -> "Tensor":
        out = self._output() if self._output is not None else None
        if out is None:
            raise RuntimeError(f"output of {self.op} is no longer alive")
        return out

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: "Tensor") -> tuple[Optional["Tensor"], ...]:
        raise NotImplementedError

    @classmethod
    def apply(cls, *inputs: "Tensor", **kwargs: Any) -> "Tensor":
        fn = cls(*inputs)
        data = fn.forward(*(t.data for t in inputs), **kwargs)
        needs_graph = _grad_enabled and any(t.requires_grad for t in inputs)
        out = Tensor(data, requires_grad=needs_graph)
        if needs_graph:
            out._ctx = fn
            fn._output = weakref.ref(out)
        return out


# alias used by callers that think in graph vertices
GraphNode = Function


class Tensor:
    """Dense float64 array that can take part in a recorded graph."""

    __slots__ = ("data", "requires_grad", "grad", "_ctx", "name", "__weakref__")
    __array_priority__ = 1000

    def __init__(self, data: ArrayLike, requires_grad: bool = False, name: str = ""):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(())
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: Optional[Tensor] = None
        self._ctx: Optional[Function] = None
        self.name = name

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._ctx is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({np.array2string(self.data, precision=4)}{tag})"

    def __len__(self) -> int:
        return self.data.shape[0]

    # -- operators (bodies live in ops.py) --------------------------------
    def __add__(self, other):
        return _ops.add(self, other)

    def __radd__(self, other):
        return _ops.add(other, self)

    def __sub__(self, other):
        return _ops.sub(self, other)

    def __rsub__(self, other):
        return _ops.sub(other, self)

    def __mul__(self, other):
        return _ops.mul(self, other)

    def __rmul__(self, other):
        return _ops.mul(other, self)

    def __truediv__(self, other):
        return _ops.div(self, other)

    def __rtruediv__(self, other):
        return _ops.div(other, self)

    def __neg__(self):
        return _ops.neg(self)

    def __matmul__(self, other):
        return _ops.matmul(self, other)

    def __getitem__(self, index):
        return _ops.slice_(self, index)

    def sum(self, axes=None, keepdims: bool = False) -> "Tensor":
        return _ops.reduce("sum", self, axes, keepdims)

    def mean(self, axes=None, keepdims: bool = False) -> "Tensor":
        return _ops.reduce("mean", self, axes, keepdims)

    def max(self, axes=None, keepdims: bool = False) -> "Tensor":
        return _ops.reduce("max", self, axes, keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return _ops.reshape(self, shape)

    def permute(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return _ops.permute(self, axes)

    @property
    def T(self) -> "Tensor":
        return _ops.permute(self, tuple(reversed(range(self.ndim))))

    def relu(self):
        return _ops.relu(self)

    def sigmoid(self):
        return _ops.sigmoid(self)

    def tanh(self):
        return _ops.tanh(self)

    def exp(self):
        return _ops.exp(self)

    def log(self):
        return _ops.log(self)

    def sqrt(self):
        return _ops.sqrt(self)

    def square(self):
        return _ops.square(self)

    def backward(self, create_graph: bool = False) -> dict[int, "Tensor"]:
        return backward(self, create_graph=create_graph)


def as_tensor(x: Union[Tensor, ArrayLike]) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _topo_order(root: Tensor) -> list[Tensor]:
    """Tensors reachable from ``root`` through recorded nodes, outputs first."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        t, expanded = stack.pop()
        if expanded:
            order.append(t)
            continue
        if id(t) in seen:
            continue
        seen.add(id(t))
        stack.append((t, True))
        if t._ctx is not None:
            for inp in t._ctx.inputs:
                if inp.requires_grad and id(inp) not in seen:
                    stack.append((inp, False))
    order.reverse()
    return order


def _backprop(root: Tensor, create_graph: bool) -> dict[int, tuple[Tensor, Tensor]]:
    if not isinstance(root, Tensor):
        raise TypeError("backward root must be a Tensor")
    if root.size != 1:
        raise ValueError(f"backward root must be a scalar, got shape {root.shape}")
    if not root.requires_grad:
        raise RuntimeError("backward on a tensor that does not require grad (detached)")

    order = _topo_order(root)
    grads: dict[int, Tensor] = {id(root): Tensor(np.ones_like(root.data))}
    result: dict[int, tuple[Tensor, Tensor]] = {}
    with set_grad_enabled(create_graph):
        for t in order:
            g = grads.pop(id(t), None)
            if g is None:
                continue
            result[id(t)] = (t, g)
            fn = t._ctx
            if fn is None:
                continue
            in_grads = fn.backward(g)
            for inp, ig in zip(fn.inputs, in_grads):
                if ig is None or not inp.requires_grad:
                    continue
                if ig.shape != inp.shape:
                    raise RuntimeError(
                        f"{fn.op} produced gradient of shape {ig.shape} for input {inp.shape}"
                    )
                prev = grads.get(id(inp))
                grads[id(inp)] = ig if prev is None else prev + ig
    return result


def backward(root: Tensor, create_graph: bool = False) -> dict[int, Tensor]:
    """Accumulate d(root)/d(leaf) into ``leaf.grad`` for every reachable leaf.

    Returns the gradient map keyed by ``id(leaf)``.  With ``create_graph`` the
    stored gradients are themselves graph-recorded.
    """
    out: dict[int, Tensor] = {}
    for key, (t, g) in _backprop(root, create_graph).items():
        if not t.is_leaf:
            continue
        if not create_graph:
            g = g.detach()
        t.grad = g if t.grad is None else (t.grad + g if create_graph else Tensor(t.grad.data + g.data))
        out[key] = t.grad
    return out


def grad(
    root: Tensor, inputs: Union[Tensor, Iterable[Tensor]], create_graph: bool = False
) -> list[Tensor]:
    """Gradients of scalar ``root`` w.r.t. ``inputs`` without touching ``.grad``.

    Inputs not reachable from ``root`` receive zeros.
    """
    if isinstance(inputs, Tensor):
        inputs = [inputs]
    inputs = list(inputs)
    res = _backprop(root, create_graph)
    out = []
    for x in inputs:
        hit = res.get(id(x))
        if hit is None:
            out.append(Tensor(np.zeros_like(x.data)))
        else:
            out.append(hit[1] if create_graph else hit[1].detach())
    return out


from . import ops as _ops  # noqa: E402  (operator bodies need Tensor defined)
