"""SE channel gating, involution, and their composition (the GIU block).

Kernel-vector layout: the K*K*G values generated for a pixel are read as a
K x K x G array, i.e. flat index ``(u * K + v) * G + g``.
"""

from __future__ import annotations

import warnings
from typing import Optional

import numpy as np

from .autodiff import Tensor, permute, relu, reshape, sigmoid
from .nn import functional as F
from .nn.layers import BatchNorm, Conv2d, Linear
from .nn.module import Module


def _reduced(channels: int, r: int) -> int:
    if r < 1 or channels % r:
        raise ValueError(f"reduction ratio {r} must divide channel count {channels}")
    return channels // r


class SEBlock(Module):
    """Squeeze-and-excitation gate without bias terms."""

    def __init__(self, channels: int, r: int = 4, spectral_norm: bool = False, rng=None):
        super().__init__()
        hidden = _reduced(channels, r)
        self.channels, self.r = channels, r
        self.w1 = Linear(channels, hidden, bias=False, spectral_norm=spectral_norm, rng=rng)
        self.w2 = Linear(hidden, channels, bias=False, spectral_norm=spectral_norm, rng=rng)

    def forward(self, x: Tensor) -> tuple[Tensor, Tensor]:
        return se_block(x, self)


def se_block(x: Tensor, p: SEBlock) -> tuple[Tensor, Tensor]:
    """Return (channel-rescaled x, gate s of shape N x C)."""
    if x.ndim != 4 or x.shape[1] != p.channels:
        raise ValueError(f"SE block expects {p.channels} channels, got input {x.shape}")
    z = F.global_avg_pool(x)
    s = sigmoid(p.w2(relu(p.w1(z))))
    n, c = s.shape
    return x * reshape(s, (n, c, 1, 1)), s


class InvolutionKernel(Module):
    """Per-pixel kernel generator: W1 sigma(W0 x_ij).

    ``sigma_mid`` selects BN + ReLU between the transforms; without it only
    ReLU is applied (keeps samples independent, as a WGAN-GP critic needs).
    """

    def __init__(
        self,
        channels: int,
        kernel_size: int = 3,
        groups: int = 1,
        r: int = 4,
        sigma_mid: bool = True,
        spectral_norm: bool = False,
        rng=None,
    ):
        super().__init__()
        if kernel_size < 1 or kernel_size % 2 == 0:
            raise ValueError(f"involution kernel size must be odd, got {kernel_size}")
        if groups < 1 or channels % groups:
            raise ValueError(f"group count {groups} must divide channel count {channels}")
        if groups > channels / 4:
            warnings.warn(
                f"{groups} kernel groups for {channels} channels gives little sharing",
                stacklevel=2,
            )
        hidden = _reduced(channels, r)
        self.channels, self.k, self.groups, self.r = channels, kernel_size, groups, r
        self.w0 = Linear(channels, hidden, bias=False, spectral_norm=spectral_norm, rng=rng)
        self.bn = BatchNorm(hidden) if sigma_mid else None
        self.w1 = Linear(
            hidden, kernel_size * kernel_size * groups, bias=False,
            spectral_norm=spectral_norm, rng=rng,
        )

    def forward(self, x: Tensor) -> Tensor:
        return involution_kernel(x, self)


def involution_kernel(x: Tensor, p: InvolutionKernel) -> Tensor:
    """(N, C, H, W) -> kernels (N, G, K*K, H, W), one K x K x G set per pixel."""
    if x.ndim != 4 or x.shape[1] != p.channels:
        raise ValueError(f"kernel generator expects {p.channels} channels, got input {x.shape}")
    n, c, h, w = x.shape
    kk = p.k * p.k
    rows = reshape(permute(x, (0, 2, 3, 1)), (n * h * w, c))
    hidden = p.w0(rows)
    if p.bn is not None:
        hidden = p.bn(hidden)
    hidden = relu(hidden)
    flat = p.w1(hidden)
    return permute(reshape(flat, (n, h, w, kk, p.groups)), (0, 4, 3, 1, 2))


def involution_apply(x: Tensor, kernels: Tensor) -> Tensor:
    """Multiply-add of per-pixel kernels over zero-padded K x K neighborhoods.

    Channel k uses kernel group ``k * G // C``.
    """
    if x.ndim != 4 or kernels.ndim != 5:
        raise ValueError(f"bad shapes: x {x.shape}, kernels {kernels.shape}")
    n, c, h, w = x.shape
    kn, g, kk, kh, kw = kernels.shape
    k = int(round(np.sqrt(kk)))
    if k * k != kk:
        raise ValueError(f"kernel axis {kk} is not a square")
    if (kn, kh, kw) != (n, h, w):
        raise ValueError(f"kernel batch/spatial extents {(kn, kh, kw)} do not match input {(n, h, w)}")
    if c % g:
        raise ValueError(f"group mismatch: {g} kernel groups cannot split {c} channels")
    patches = reshape(F.unfold(x, k), (n, g, c // g, kk, h, w))
    weights = reshape(kernels, (n, g, 1, kk, h, w))
    return reshape((patches * weights).sum(3), (n, c, h, w))


def involution_generator_param_count(channels: int, r: int, k: int, groups: int) -> int:
    """Weights in the two kernel-generation transforms (BN affine excluded)."""
    hidden = _reduced(channels, r)
    return channels * hidden + hidden * k * k * groups


class GIU(Module):
    """SE gate feeding an involution kernel generator.

    Kernels are generated from the gated features; the multiply-add gathers
    values from the block input.  ``pre_conv`` (optional, channel-preserving)
    produces the features the SE gate acts on.
    """

    def __init__(
        self,
        channels: int,
        kernel_size: int = 3,
        groups: int = 1,
        se_r: int = 4,
        inv_r: int = 4,
        sigma_mid: bool = True,
        pre_conv: bool = False,
        spectral_norm: bool = False,
        rng=None,
    ):
        super().__init__()
        self.channels = channels
        self.pre_conv = (
            Conv2d(channels, channels, 3, 1, 1, spectral_norm=spectral_norm, rng=rng) if pre_conv else None
        )
        self.se = SEBlock(channels, se_r, spectral_norm=spectral_norm, rng=rng)
        self.inv = InvolutionKernel(
            channels, kernel_size, groups, inv_r, sigma_mid, spectral_norm=spectral_norm, rng=rng
        )
        self.last_gate: Optional[np.ndarray] = None

    def forward(self, x: Tensor, gate: Optional[Tensor] = None) -> Tensor:
        return giu_forward(x, self, gate)


def giu_forward(x: Tensor, p: GIU, gate: Optional[Tensor] = None) -> Tensor:
    """Run the GIU block; ``gate`` (N x C) overrides the SE output when given."""
    if x.ndim != 4 or x.shape[1] != p.channels:
        raise ValueError(f"GIU expects {p.channels} channels, got input {x.shape}")
    u = p.pre_conv(x) if p.pre_conv is not None else x
    if gate is None:
        gated, s = se_block(u, p.se)
    else:
        s = gate
        gated = u * reshape(gate, (gate.shape[0], gate.shape[1], 1, 1))
    p.last_gate = s.data
    kernels = involution_kernel(gated, p.inv)
    return involution_apply(x, kernels)
