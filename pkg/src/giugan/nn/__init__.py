from . import functional
from .functional import (
    batch_norm,
    conv2d,
    conv_transpose2d,
    global_avg_pool,
    linear,
    standardize,
    unfold,
)
from .layers import INIT_STD, Activation, BatchNorm, Conv2d, ConvTranspose2d, Linear, Reshape
from .module import Module, Parameter, Sequential

__all__ = [
    "INIT_STD",
    "Activation",
    "BatchNorm",
    "Conv2d",
    "ConvTranspose2d",
    "Linear",
    "Module",
    "Parameter",
    "Reshape",
    "Sequential",
    "batch_norm",
    "conv2d",
    "conv_transpose2d",
    "functional",
    "global_avg_pool",
    "linear",
    "standardize",
    "unfold",
]
