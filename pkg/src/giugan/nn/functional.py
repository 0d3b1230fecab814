"""Stateless layer functions built from differentiable primitives."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .. import kernels
from ..autodiff import Tensor, col2im, im2col, matmul, permute, reshape


def _check4d(x: Tensor, what: str) -> None:
    if x.ndim != 4:
        raise ValueError(f"{what} expects N x C x H x W input, got {x.shape}")


def conv2d(
    x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: int = 1, padding: int = 0
) -> Tensor:
    """Cross-correlation; ``weight`` is (C_out, C_in, K, K)."""
    _check4d(x, "conv2d")
    n, c, h, w = x.shape
    c_out, c_in, k, k2 = weight.shape
    if c != c_in:
        raise ValueError(f"conv2d channel mismatch: input has {c}, weight expects {c_in}")
    if k != k2:
        raise ValueError("only square kernels are supported")
    ho = kernels.out_extent(h, k, stride, padding)
    wo = kernels.out_extent(w, k, stride, padding)
    if ho < 1 or wo < 1:
        raise ValueError(f"non-positive output extent ({ho}, {wo})")
    cols = reshape(im2col(x, k, stride, padding), (n * ho * wo, c * k * k))
    out = matmul(cols, permute(reshape(weight, (c_out, c * k * k)), (1, 0)))
    out = permute(reshape(out, (n, ho, wo, c_out)), (0, 3, 1, 2))
    if bias is not None:
        out = out + reshape(bias, (1, c_out, 1, 1))
    return out


def conv_transpose2d(
    x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: int = 1, padding: int = 0
) -> Tensor:
    """Adjoint of :func:`conv2d`; ``weight`` is (C_in, C_out, K, K).

    Output extent is ``(H - 1) * stride - 2 * padding + K``.
    """
    _check4d(x, "conv_transpose2d")
    n, c, h, w = x.shape
    c_in, c_out, k, k2 = weight.shape
    if c != c_in:
        raise ValueError(f"conv_transpose2d channel mismatch: input has {c}, weight expects {c_in}")
    if k != k2:
        raise ValueError("only square kernels are supported")
    ho = (h - 1) * stride - 2 * padding + k
    wo = (w - 1) * stride - 2 * padding + k
    if ho < 1 or wo < 1:
        raise ValueError(f"non-positive output extent ({ho}, {wo})")
    rows = reshape(permute(x, (0, 2, 3, 1)), (n * h * w, c))
    cols = matmul(rows, reshape(weight, (c_in, c_out * k * k)))
    cols = reshape(cols, (n, h, w, c_out, k, k))
    out = col2im(cols, (ho, wo), stride, padding)
    if bias is not None:
        out = out + reshape(bias, (1, c_out, 1, 1))
    return out


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """x W^T + b with ``weight`` shaped (F_out, F_in)."""
    if x.ndim != 2:
        raise ValueError(f"linear expects N x F input, got {x.shape}")
    if x.shape[1] != weight.shape[1]:
        raise ValueError(f"linear feature mismatch: {x.shape[1]} vs {weight.shape[1]}")
    out = matmul(x, permute(weight, (1, 0)))
    if bias is not None:
        out = out + reshape(bias, (1, weight.shape[0]))
    return out


def _stat_axes(x: Tensor) -> tuple[int, ...]:
    if x.ndim not in (2, 4):
        raise ValueError(f"normalization expects N x C or N x C x H x W, got {x.shape}")
    return (0,) if x.ndim == 2 else (0, 2, 3)


def _channel_shape(x: Tensor) -> tuple[int, ...]:
    return (1, x.shape[1]) if x.ndim == 2 else (1, x.shape[1], 1, 1)


def standardize(
    x: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Centering and scaling of batch norm, no affine.

    Training mode uses batch statistics over every axis but 1 and updates the
    running estimates in place (unbiased variance); eval mode uses them.
    """
    axes = _stat_axes(x)
    cshape = _channel_shape(x)
    if training:
        count = int(np.prod([x.shape[a] for a in axes]))
        if count < 2:
            raise ValueError("batch norm in training mode needs at least 2 values per channel")
        mu = x.mean(axes, keepdims=True)
        xc = x - mu
        var = (xc * xc).mean(axes, keepdims=True)
        bm = mu.data.reshape(-1)
        bv = var.data.reshape(-1)
        running_mean *= 1.0 - momentum
        running_mean += momentum * bm
        running_var *= 1.0 - momentum
        running_var += momentum * bv * count / (count - 1)
        return xc / (var + eps).sqrt()
    mu = Tensor(running_mean.reshape(cshape))
    sd = Tensor(np.sqrt(running_var + eps).reshape(cshape))
    return (x - mu) / sd


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    cshape = _channel_shape(x)
    xs = standardize(x, running_mean, running_var, training, momentum, eps)
    return xs * reshape(gamma, cshape) + reshape(beta, cshape)


def global_avg_pool(x: Tensor) -> Tensor:
    """(N, C, H, W) -> (N, C) spatial mean."""
    _check4d(x, "global_avg_pool")
    return x.mean((2, 3))


def unfold(x: Tensor, k: int) -> Tensor:
    """Zero-padded K x K neighborhoods: (N, C, H, W) -> (N, C, K*K, H, W).

    Entry ``[n, c, u*K + v, i, j]`` is ``x[n, c, i + u - K//2, j + v - K//2]``.
    """
    _check4d(x, "unfold")
    if k < 1 or k % 2 == 0:
        raise ValueError(f"unfold needs an odd kernel size, got {k}")
    n, c, h, w = x.shape
    cols = im2col(x, k, 1, k // 2)  # (N, H, W, C, K, K)
    return reshape(permute(cols, (0, 3, 4, 5, 1, 2)), (n, c, k * k, h, w))
