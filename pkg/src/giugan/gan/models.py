"""Declarative generator / discriminator stacks and their builders."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any, Optional

import numpy as np

from ..autodiff import Tensor, reshape
from ..giu import GIU
from ..nn import Activation, BatchNorm, Conv2d, ConvTranspose2d, Linear, Module
from ..rbn import RBN
from ..specnorm import SpectralNorm

KINDS = ("conv", "conv_transpose", "linear", "giu")
NORMS = ("none", "bn", "rbn")
ACTIVATIONS = ("relu", "leaky_relu", "tanh", "none")
LEAK = 0.1


@dataclass
class LayerSpec:
    name: str
    kind: str
    channels: int
    kernel: int = 3
    stride: int = 1
    padding: int = 1
    norm: str = "none"
    activation: str = "none"
    spectral_norm: bool = True
    spatial: int = 0  # linear only: reshape output to channels x spatial x spatial
    groups: int = 1  # giu only
    se_r: int = 4
    inv_r: int = 4
    sigma_mid: bool = True


@dataclass
class ModelSpec:
    role: str  # "generator" or "discriminator"
    layers: list[LayerSpec]
    image_size: int
    image_channels: int = 3
    latent_dim: int = 64

    def validate(self) -> None:
        if self.role not in ("generator", "discriminator"):
            raise ValueError(f"unknown role {self.role!r}")
        if not self.layers:
            raise ValueError("model has no layers")
        names = [l.name for l in self.layers]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate layer names in {names}")
        for l in self.layers:
            if l.kind not in KINDS:
                raise ValueError(f"layer {l.name}: unknown kind {l.kind!r}")
            if l.norm not in NORMS:
                raise ValueError(f"layer {l.name}: unknown norm {l.norm!r}")
            if l.activation not in ACTIVATIONS:
                raise ValueError(f"layer {l.name}: unknown activation {l.activation!r}")
        if self.role == "generator" and self.layers[-1].activation != "tanh":
            raise ValueError("generator output activation must be tanh")
        if self.role == "discriminator" and any(l.norm != "none" for l in self.layers):
            raise ValueError("discriminator layers must not use BN/RBN")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ModelSpec":
        d = dict(d)
        d["layers"] = [LayerSpec(**l) for l in d["layers"]]
        return cls(**d)


def _levels(image_size: int) -> int:
    n = int(round(math.log2(image_size / 4)))
    if n < 1 or 4 * 2**n != image_size:
        raise ValueError(f"image size must be 4 * 2^k with k >= 1, got {image_size}")
    return n


def default_generator_spec(
    image_size: int = 32,
    width: int = 16,
    latent_dim: int = 64,
    giu_on: bool = True,
    rbn_on: bool = True,
    spectral_norm: bool = True,
    giu_kernel: int = 3,
    giu_groups: int = 1,
    se_r: int = 4,
    inv_r: int = 4,
) -> ModelSpec:
    """latent -> linear -> 4x4 map -> GIU -> stride-2 transposed convs -> 3x3 conv -> tanh.

    Norm slots sit after the linear and after each transposed conv; with
    ``rbn_on`` the first and last slots are RBN, the rest BN.
    """
    n_up = _levels(image_size)
    ch = width * 2**n_up
    slot_norm = lambda i: "rbn" if rbn_on and i in (0, n_up) else "bn"  # noqa: E731
    layers = [
        LayerSpec("fc", "linear", ch, spatial=4, norm=slot_norm(0), activation="relu",
                  spectral_norm=spectral_norm)
    ]
    if giu_on:
        layers.append(LayerSpec("giu", "giu", ch, kernel=giu_kernel, groups=giu_groups, se_r=se_r,
                                inv_r=inv_r, sigma_mid=True, spectral_norm=spectral_norm))
    for i in range(1, n_up + 1):
        ch //= 2
        layers.append(LayerSpec(f"up{i}", "conv_transpose", ch, kernel=4, stride=2, padding=1,
                                norm=slot_norm(i), activation="relu", spectral_norm=spectral_norm))
    layers.append(LayerSpec("out", "conv", 3, kernel=3, stride=1, padding=1, activation="tanh",
                            spectral_norm=spectral_norm))
    return ModelSpec("generator", layers, image_size, latent_dim=latent_dim)


def default_discriminator_spec(
    image_size: int = 32,
    width: int = 16,
    giu_on: bool = True,
    spectral_norm: bool = True,
    giu_kernel: int = 3,
    giu_groups: int = 1,
    se_r: int = 4,
    inv_r: int = 4,
) -> ModelSpec:
    """3x3 conv -> stride-2 convs down to 4x4 -> GIU -> 3x3 conv -> linear score.

    LeakyReLU(0.1) throughout, no normalization.  The GIU kernel generator
    uses ReLU only so every sample's score depends on that sample alone.
    """
    n_down = _levels(image_size)
    ch = width
    layers = [LayerSpec("in", "conv", ch, activation="leaky_relu", spectral_norm=spectral_norm)]
    for i in range(1, n_down + 1):
        ch *= 2
        layers.append(LayerSpec(f"down{i}", "conv", ch, kernel=4, stride=2, padding=1,
                                activation="leaky_relu", spectral_norm=spectral_norm))
    if giu_on:
        layers.append(LayerSpec("giu", "giu", ch, kernel=giu_kernel, groups=giu_groups, se_r=se_r,
                                inv_r=inv_r, sigma_mid=False, spectral_norm=spectral_norm))
    layers.append(LayerSpec("last", "conv", ch, activation="leaky_relu", spectral_norm=spectral_norm))
    layers.append(LayerSpec("score", "linear", 1, spectral_norm=spectral_norm))
    return ModelSpec("discriminator", layers, image_size)


class Block(Module):
    def __init__(self, spec: LayerSpec, in_shape: tuple[int, ...], rng: np.random.Generator):
        super().__init__()
        self.spec = spec
        sn = spec.spectral_norm
        if spec.kind == "linear":
            in_feats = int(np.prod(in_shape))
            out_feats = spec.channels * max(spec.spatial, 1) ** 2
            self.op = Linear(in_feats, out_feats, spectral_norm=sn, rng=rng)
            self.out_shape = (spec.channels, spec.spatial, spec.spatial) if spec.spatial else (out_feats,)
        elif spec.kind == "conv":
            c, h, w = in_shape
            self.op = Conv2d(c, spec.channels, spec.kernel, spec.stride, spec.padding, spectral_norm=sn, rng=rng)
            size = lambda d: (d + 2 * spec.padding - spec.kernel) // spec.stride + 1  # noqa: E731
            self.out_shape = (spec.channels, size(h), size(w))
        elif spec.kind == "conv_transpose":
            c, h, w = in_shape
            self.op = ConvTranspose2d(c, spec.channels, spec.kernel, spec.stride, spec.padding,
                                      spectral_norm=sn, rng=rng)
            size = lambda d: (d - 1) * spec.stride - 2 * spec.padding + spec.kernel  # noqa: E731
            self.out_shape = (spec.channels, size(h), size(w))
        else:
            c = in_shape[0]
            if c != spec.channels:
                raise ValueError(f"GIU layer {spec.name} expects {spec.channels} channels, gets {c}")
            self.giu = GIU(c, spec.kernel, spec.groups, spec.se_r, spec.inv_r, spec.sigma_mid,
                           spectral_norm=sn, rng=rng)
            self.out_shape = tuple(in_shape)
        if min(self.out_shape) < 1:
            raise ValueError(f"layer {spec.name} produces empty output {self.out_shape}")
        feats = self.out_shape[0]
        if spec.norm == "bn":
            self.norm = BatchNorm(feats)
        elif spec.norm == "rbn":
            if len(self.out_shape) != 3:
                raise ValueError("RBN needs a spatial feature map")
            self.norm = RBN(feats)
        else:
            self.norm = None
        self.act = Activation(spec.activation, LEAK)

    def forward(self, x: Tensor) -> Tensor:
        if self.spec.kind == "giu":
            x = self.giu(x)
        else:
            x = self.op(x)
        if len(self.out_shape) == 3 and x.ndim == 2:
            x = reshape(x, (x.shape[0],) + self.out_shape)
        if self.norm is not None:
            x = self.norm(x)
        return self.act(x)


class Network(Module):
    """Ordered named blocks; parameter names are ``<layer name>.<...>``."""

    def __init__(self, spec: ModelSpec, rng: Optional[np.random.Generator] = None):
        super().__init__()
        spec.validate()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.spec = spec
        shape: tuple[int, ...]
        if spec.role == "generator":
            shape = (spec.latent_dim,)
        else:
            shape = (spec.image_channels, spec.image_size, spec.image_size)
        self.layer_names = []
        for ls in spec.layers:
            block = Block(ls, shape, rng)
            setattr(self, ls.name, block)
            self.layer_names.append(ls.name)
            shape = block.out_shape
        self.out_shape = shape
        if spec.role == "generator" and shape != (spec.image_channels, spec.image_size, spec.image_size):
            raise ValueError(f"generator produces {shape}, expected images of size {spec.image_size}")
        if spec.role == "discriminator" and shape != (1,):
            raise ValueError(f"discriminator must end in one score, produces {shape}")

    def forward(self, x: Tensor) -> Tensor:
        for name in self.layer_names:
            x = getattr(self, name)(x)
        return x

    def spectral_norms(self) -> dict[str, SpectralNorm]:
        """Every spectral-norm state keyed by its owning layer's path."""
        return {name[: -len(".sn")]: m for name, m in self.named_modules() if name.endswith(".sn")}


def build_model(spec: ModelSpec, rng: Optional[np.random.Generator] = None) -> Network:
    return Network(spec, rng)
