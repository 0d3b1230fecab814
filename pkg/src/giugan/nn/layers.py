"""Parameterized layers.

Weights are drawn from N(0, 0.02^2); every weight-bearing layer can wrap its
weight in spectral normalization.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..autodiff import Tensor, leaky_relu, relu, reshape, tanh
from ..specnorm import SpectralNorm
from . import functional as F
from .module import Module, Parameter

INIT_STD = 0.02


def _rng(rng: Optional[np.random.Generator]) -> np.random.Generator:
    return rng if rng is not None else np.random.default_rng(0)


class _Weighted(Module):
    """Mixin for layers whose ``weight`` may be spectrally normalized."""

    def _init_sn(self, spectral_norm: bool, rng: np.random.Generator) -> None:
        self.sn = SpectralNorm(self.weight.shape, rng=rng) if spectral_norm else None

    def effective_weight(self) -> Tensor:
        if self.sn is None:
            return self.weight
        return self.sn(self.weight)


class Linear(_Weighted):
    def __init__(self, in_features, out_features, bias=True, spectral_norm=False, rng=None):
        super().__init__()
        rng = _rng(rng)
        self.weight = Parameter(rng.normal(0.0, INIT_STD, (out_features, in_features)))
        self.bias = Parameter(np.zeros(out_features)) if bias else None
        self._init_sn(spectral_norm, rng)

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim == 4:
            x = reshape(x, (x.shape[0], -1))
        return F.linear(x, self.effective_weight(), self.bias)


class Conv2d(_Weighted):
    def __init__(
        self, in_channels, out_channels, kernel_size, stride=1, padding=0, bias=True,
        spectral_norm=False, rng=None,
    ):
        super().__init__()
        if in_channels < 1 or out_channels < 1:
            raise ValueError("channel counts must be positive")
        rng = _rng(rng)
        self.stride, self.padding = stride, padding
        self.weight = Parameter(
            rng.normal(0.0, INIT_STD, (out_channels, in_channels, kernel_size, kernel_size))
        )
        self.bias = Parameter(np.zeros(out_channels)) if bias else None
        self._init_sn(spectral_norm, rng)

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.effective_weight(), self.bias, self.stride, self.padding)


class ConvTranspose2d(_Weighted):
    def __init__(
        self, in_channels, out_channels, kernel_size, stride=1, padding=0, bias=True,
        spectral_norm=False, rng=None,
    ):
        super().__init__()
        rng = _rng(rng)
        self.stride, self.padding = stride, padding
        self.weight = Parameter(
            rng.normal(0.0, INIT_STD, (in_channels, out_channels, kernel_size, kernel_size))
        )
        self.bias = Parameter(np.zeros(out_channels)) if bias else None
        self._init_sn(spectral_norm, rng)

    def forward(self, x: Tensor) -> Tensor:
        return F.conv_transpose2d(x, self.effective_weight(), self.bias, self.stride, self.padding)


class BatchNorm(Module):
    """Batch normalization over N x C or N x C x H x W inputs."""

    def __init__(self, num_features: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.gamma = Parameter(np.ones(num_features))
        self.beta = Parameter(np.zeros(num_features))
        self.register_buffer("running_mean", np.zeros(num_features))
        self.register_buffer("running_var", np.ones(num_features))
        self.momentum, self.eps = momentum, eps

    def forward(self, x: Tensor) -> Tensor:
        return F.batch_norm(
            x, self.gamma, self.beta, self.running_mean, self.running_var,
            self.training, self.momentum, self.eps,
        )


class Activation(Module):
    def __init__(self, kind: str, slope: float = 0.1):
        super().__init__()
        if kind not in ("relu", "leaky_relu", "tanh", "none"):
            raise ValueError(f"unknown activation {kind!r}")
        self.kind, self.slope = kind, slope

    def forward(self, x: Tensor) -> Tensor:
        if self.kind == "relu":
            return relu(x)
        if self.kind == "leaky_relu":
            return leaky_relu(x, self.slope)
        if self.kind == "tanh":
            return tanh(x)
        return x


class Reshape(Module):
    def __init__(self, *shape: int):
        super().__init__()
        self.shape = shape

    def forward(self, x: Tensor) -> Tensor:
        return reshape(x, (x.shape[0],) + self.shape)
