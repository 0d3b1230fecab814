"""Spectral normalization by persistent power iteration."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .autodiff import Tensor, reshape
from .nn.module import Module


def _normalize(vec: np.ndarray, fallback: np.ndarray, eps: float) -> np.ndarray:
    n = np.linalg.norm(vec)
    return fallback if n < eps else vec / n


class SpectralNorm(Module):
    """Power-iteration state for one weight.

    The weight is viewed as a matrix ``[shape[0], prod(shape[1:])]``.  ``u``
    and ``v`` are persistent unit-norm singular-vector estimates.
    """

    def __init__(
        self,
        weight_shape: tuple[int, ...],
        n_power_iterations: int = 1,
        eps: float = 1e-12,
        rng: Optional[np.random.Generator] = None,
    ):
        super().__init__()
        if n_power_iterations < 1:
            raise ValueError("n_power_iterations must be positive")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.rows = int(weight_shape[0])
        self.cols = int(np.prod(weight_shape[1:]))
        u = rng.standard_normal(self.rows)
        v = rng.standard_normal(self.cols)
        self.register_buffer("u", u / np.linalg.norm(u))
        self.register_buffer("v", v / np.linalg.norm(v))
        self.n_power_iterations = n_power_iterations
        self.eps = eps
        self.sigma = float("nan")
        self.degenerate = False

    def forward(self, weight: Tensor) -> Tensor:
        return spectral_norm_apply(weight, self, self.training)


def power_iterate(mat: np.ndarray, state: SpectralNorm, n_iter: int) -> None:
    u, v = state.u.copy(), state.v.copy()
    for _ in range(n_iter):
        v = _normalize(mat.T @ u, v, state.eps)
        u = _normalize(mat @ v, u, state.eps)
    state.u[...] = u
    state.v[...] = v


def spectral_norm_apply(
    weight: Tensor, state: SpectralNorm, training: bool, n_iter: Optional[int] = None
) -> Tensor:
    """Return ``weight / sigma`` with sigma = u^T W v.

    Training runs the power iteration first (updating ``state``); eval reuses
    the stored vectors.  The gradient treats u and v as constants.  A sigma
    below ``eps`` leaves the weight unchanged and sets ``state.degenerate``.
    """
    mat = weight.data.reshape(state.rows, state.cols)
    if training:
        power_iterate(mat, state, n_iter or state.n_power_iterations)
    sigma_val = float(state.u @ mat @ state.v)
    state.sigma = sigma_val
    if abs(sigma_val) < state.eps:
        state.degenerate = True
        return weight
    state.degenerate = False
    uv = Tensor(np.outer(state.u, state.v))
    sigma = (reshape(weight, (state.rows, state.cols)) * uv).sum()
    return weight / reshape(sigma, (1,) * weight.ndim)
