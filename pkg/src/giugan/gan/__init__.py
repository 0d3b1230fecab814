"""WGAN-GP models, losses and the training loop."""

from ..optim import Adagrad, Adam, AdamState, Optimizer, RMSprop, adam_step, make_optimizer
from .losses import (
    NumericError,
    check_finite,
    critic_loss,
    generator_loss,
    gradient_penalty,
    interpolate,
    wgan_gp_losses,
)
from .models import (
    Block,
    LayerSpec,
    ModelSpec,
    Network,
    build_model,
    default_discriminator_spec,
    default_generator_spec,
)

__all__ = [
    "Adagrad",
    "Adam",
    "AdamState",
    "Block",
    "LayerSpec",
    "ModelSpec",
    "Network",
    "NumericError",
    "Optimizer",
    "RMSprop",
    "adam_step",
    "build_model",
    "check_finite",
    "critic_loss",
    "default_discriminator_spec",
    "default_generator_spec",
    "generator_loss",
    "gradient_penalty",
    "interpolate",
    "make_optimizer",
    "wgan_gp_losses",
]
