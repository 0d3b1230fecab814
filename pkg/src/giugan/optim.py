"""First-order optimizers acting in place on Parameter data."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .autodiff import Tensor


@dataclass
class AdamState:
    lr: float = 2e-4
    beta1: float = 0.0
    beta2: float = 0.9
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def _grad_arrays(params: Sequence[Tensor], grads: Optional[Sequence]) -> list[np.ndarray]:
    if grads is None:
        grads = [p.grad for p in params]
    out = []
    for p, g in zip(params, grads):
        if g is None:
            out.append(np.zeros_like(p.data))
        else:
            arr = g.data if isinstance(g, Tensor) else np.asarray(g, dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ValueError(f"gradient shape {arr.shape} does not match parameter {p.data.shape}")
            out.append(arr)
    return out


def adam_step(params: Sequence[Tensor], grads, s: AdamState) -> Sequence[Tensor]:
    """One bias-corrected Adam update; ``grads=None`` reads ``p.grad``."""
    gs = _grad_arrays(params, grads)
    if not s.m:
        s.m = [np.zeros_like(p.data) for p in params]
        s.v = [np.zeros_like(p.data) for p in params]
    s.step += 1
    c1 = 1.0 - s.beta1**s.step
    c2 = 1.0 - s.beta2**s.step
    for p, g, m, v in zip(params, gs, s.m, s.v):
        m *= s.beta1
        m += (1.0 - s.beta1) * g
        v *= s.beta2
        v += (1.0 - s.beta2) * g * g
        p.data -= s.lr * (m / c1) / (np.sqrt(v / c2) + s.eps)
    return params


class Optimizer:
    def __init__(self, params: Sequence[Tensor], lr: float):
        self.params = list(params)
        self.lr = lr

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        raise NotImplementedError


class Adam(Optimizer):
    def __init__(self, params, lr=2e-4, beta1=0.0, beta2=0.9, eps=1e-8):
        super().__init__(params, lr)
        self.state = AdamState(lr, beta1, beta2, eps)

    def step(self) -> None:
        adam_step(self.params, None, self.state)


class RMSprop(Optimizer):
    def __init__(self, params, lr=2e-4, alpha=0.99, eps=1e-8):
        super().__init__(params, lr)
        self.alpha, self.eps = alpha, eps
        self.sq = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        for p, g, sq in zip(self.params, _grad_arrays(self.params, None), self.sq):
            sq *= self.alpha
            sq += (1.0 - self.alpha) * g * g
            p.data -= self.lr * g / (np.sqrt(sq) + self.eps)


class Adagrad(Optimizer):
    def __init__(self, params, lr=2e-4, eps=1e-10):
        super().__init__(params, lr)
        self.eps = eps
        self.acc = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        for p, g, acc in zip(self.params, _grad_arrays(self.params, None), self.acc):
            acc += g * g
            p.data -= self.lr * g / (np.sqrt(acc) + self.eps)


def make_optimizer(kind: str, params, lr: float, beta1: float = 0.0, beta2: float = 0.9) -> Optimizer:
    if kind == "adam":
        return Adam(params, lr, beta1, beta2)
    if kind == "rmsprop":
        return RMSprop(params, lr)
    if kind == "adagrad":
        return Adagrad(params, lr)
    raise ValueError(f"unknown optimizer {kind!r}")
