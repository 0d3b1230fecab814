"""Involution-based GAN components on a small float64 autodiff engine.

Subpackages: ``autodiff`` (tensors and reverse mode), ``nn`` (layers),
``giu`` / ``rbn`` / ``specnorm`` (the model blocks), ``gan`` (models,
losses, training), ``metrics`` (proxy IS and FID), ``data`` and ``cli``.
"""

from .autodiff import Tensor, grad, no_grad
from .config import RunConfig, load_config
from .gan import build_model
from .gan.train import train
from .giu import GIU, involution_apply
from .kernels import BACKEND as KERNEL_BACKEND
from .rbn import RBN
from .specnorm import SpectralNorm

__version__ = "0.1.0"

__all__ = [
    "GIU",
    "KERNEL_BACKEND",
    "RBN",
    "RunConfig",
    "SpectralNorm",
    "Tensor",
    "__version__",
    "build_model",
    "grad",
    "involution_apply",
    "load_config",
    "no_grad",
    "train",
]
