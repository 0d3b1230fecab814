"""Representative batch normalization.

Batch norm with a centering calibration before the statistics
(x + w_m * K_m) and a sigmoid scaling calibration after standardization
(x_s * sigmoid(w_v * K_s + w_b)); K_m and K_s are per-instance spatial means.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .autodiff import Tensor, reshape, sigmoid
from .nn import functional as F
from .nn.module import Module, Parameter


class RBN(Module):
    def __init__(self, num_features: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        shape = (1, num_features, 1, 1)
        self.gamma = Parameter(np.ones(num_features))
        self.beta = Parameter(np.zeros(num_features))
        self.w_m = Parameter(np.zeros(shape))
        self.w_v = Parameter(np.zeros(shape))
        self.w_b = Parameter(np.zeros(shape))
        self.register_buffer("running_mean", np.zeros(num_features))
        self.register_buffer("running_var", np.ones(num_features))
        self.momentum, self.eps = momentum, eps

    def forward(self, x: Tensor) -> Tensor:
        return rbn_forward(x, self, self.training)


class RBNParts(NamedTuple):
    centered_input: Tensor  # x + w_m * K_m
    standardized: Tensor  # X_s
    gate: Tensor  # sigmoid(w_v * K_s + w_b), N x C x 1 x 1
    calibrated: Tensor  # X_s * gate
    output: Tensor


def rbn_parts(x: Tensor, s: RBN, training: bool) -> RBNParts:
    if x.ndim != 4:
        raise ValueError(f"RBN expects N x C x H x W input, got {x.shape}")
    c = x.shape[1]
    k_m = x.mean((2, 3), keepdims=True)
    x_cm = x + s.w_m * k_m
    x_s = F.standardize(x_cm, s.running_mean, s.running_var, training, s.momentum, s.eps)
    k_s = x_s.mean((2, 3), keepdims=True)
    gate = sigmoid(s.w_v * k_s + s.w_b)
    x_cs = x_s * gate
    y = x_cs * reshape(s.gamma, (1, c, 1, 1)) + reshape(s.beta, (1, c, 1, 1))
    return RBNParts(x_cm, x_s, gate, x_cs, y)


def rbn_forward(x: Tensor, s: RBN, training: bool) -> Tensor:
    return rbn_parts(x, s, training).output


def rbn_centering_shift(x: Tensor, w_m: Tensor) -> Tensor:
    """w_m * (K_m - E(X)): how far centering calibration moves the centered input."""
    k_m = x.mean((2, 3), keepdims=True)
    e_x = x.mean((0, 2, 3), keepdims=True)
    return w_m * (k_m - e_x)
