"""WGAN-GP objective."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from ..autodiff import Tensor, concat, grad, reshape, sqrt

Critic = Callable[[Tensor], Tensor]


class NumericError(FloatingPointError):
    """A loss became NaN or infinite."""


def _arr(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def _draw_eps(rng: Optional[np.random.Generator], n: int, ndim: int) -> np.ndarray:
    rng = rng if rng is not None else np.random.default_rng()
    return rng.uniform(0.0, 1.0, (n,) + (1,) * (ndim - 1))


def interpolate(x_real: np.ndarray, x_fake: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """eps * real + (1 - eps) * fake with one eps per sample."""
    return eps * x_real + (1.0 - eps) * x_fake


def _penalty_from(scores_hat: Tensor, x_hat: Tensor, lam: float) -> Tensor:
    (g,) = grad(scores_hat.sum(), [x_hat], create_graph=True)
    n = g.shape[0]
    norms = sqrt(reshape(g * g, (n, -1)).sum(1))
    return ((norms - 1.0) * (norms - 1.0)).mean() * lam


def gradient_penalty(
    D: Critic,
    x_real,
    x_fake,
    lam: float = 10.0,
    rng: Optional[np.random.Generator] = None,
    eps: Optional[np.ndarray] = None,
) -> Tensor:
    """lam * mean((||grad_xhat D(xhat)||_2 - 1)^2) at per-sample interpolates.

    Differentiable w.r.t. the critic's parameters (double backward).
    """
    real, fake = _arr(x_real), _arr(x_fake)
    if real.shape != fake.shape:
        raise ValueError(f"real {real.shape} and fake {fake.shape} batches differ")
    if eps is None:
        eps = _draw_eps(rng, real.shape[0], real.ndim)
    x_hat = Tensor(interpolate(real, fake, eps), requires_grad=True)
    return _penalty_from(D(x_hat), x_hat, lam)


def critic_loss(
    D: Critic,
    x_real,
    x_fake,
    lam: float = 10.0,
    rng: Optional[np.random.Generator] = None,
    eps: Optional[np.ndarray] = None,
) -> tuple[Tensor, Tensor]:
    """mean D(fake) - mean D(real) + penalty, from one critic pass over all three batches.

    Requires a critic whose per-sample scores do not depend on other samples.
    Returns (loss, penalty).
    """
    real, fake = _arr(x_real), _arr(x_fake)
    if real.shape != fake.shape:
        raise ValueError(f"real {real.shape} and fake {fake.shape} batches differ")
    m = real.shape[0]
    if eps is None:
        eps = _draw_eps(rng, m, real.ndim)
    x_hat = Tensor(interpolate(real, fake, eps), requires_grad=True)
    scores = D(concat([Tensor(real), Tensor(fake), x_hat], axis=0))
    penalty = _penalty_from(scores[2 * m :], x_hat, lam)
    loss = scores[m : 2 * m].mean() - scores[:m].mean() + penalty
    return loss, penalty


def generator_loss(D: Critic, fake: Tensor) -> Tensor:
    return -D(fake).mean()


def check_finite(**losses: Tensor) -> None:
    for name, t in losses.items():
        if not np.all(np.isfinite(_arr(t))):
            raise NumericError(f"{name} is not finite: {_arr(t)}")


def wgan_gp_losses(
    D: Critic,
    G: Callable[[Tensor], Tensor],
    x_real,
    z,
    lam: float = 10.0,
    rng: Optional[np.random.Generator] = None,
    eps: Optional[np.ndarray] = None,
) -> tuple[Tensor, Tensor]:
    """(L_D, L_G) for one real batch and one latent batch.

    L_D treats the generated batch as constant; L_G keeps the generator graph.
    """
    fake = G(z if isinstance(z, Tensor) else Tensor(z))
    loss_d, _ = critic_loss(D, x_real, fake.data, lam, rng, eps)
    loss_g = generator_loss(D, fake)
    check_finite(loss_d=loss_d, loss_g=loss_g)
    return loss_d, loss_g
