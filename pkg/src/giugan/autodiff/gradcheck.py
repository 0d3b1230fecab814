"""Central finite-difference gradient checking."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .tensor import Tensor, grad


class NonDeterministicError(RuntimeError):
    """Raised when the checked function gives different values for identical inputs."""


@dataclass
class GradCheckReport:
    max_rel_error: float
    tol: float
    n_checked: int
    n_skipped: int
    worst: Optional[tuple[int, tuple[int, ...]]] = None
    per_input: list[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tol

    def __bool__(self) -> bool:
        return self.passed


def _eval(f, xs) -> float:
    out = f(*xs)
    if out.size != 1:
        raise ValueError(f"checked function must be scalar-valued, got shape {out.shape}")
    return float(out.data.reshape(-1)[0])


def grad_check(
    f: Callable[..., Tensor],
    x: Union[Tensor, Sequence[Tensor]],
    eps: float = 1e-5,
    tol: float = 1e-4,
    floor: float = 1e-4,
    max_checks: Optional[int] = None,
    seed: int = 0,
) -> GradCheckReport:
    """Compare analytic gradients of ``f(*xs)`` against central differences.

    The error of a coordinate is ``|a - n| / max(|a|, |n|, floor)``.
    Coordinates where the one-sided differences disagree (a kink such as
    ReLU at 0) are skipped.  ``max_checks`` samples that many coordinates
    per input.
    """
    xs = [x] if isinstance(x, Tensor) else list(x)
    for t in xs:
        if not t.requires_grad:
            raise ValueError("grad_check inputs must require grad")

    f0 = _eval(f, xs)
    if _eval(f, xs) != f0:
        raise NonDeterministicError("function returned different values for identical inputs")

    out = f(*xs)
    analytic = grad(out, xs)

    rng = np.random.default_rng(seed)
    worst_err, worst_at = 0.0, None
    n_checked = n_skipped = 0
    per_input = []
    for ti, (t, ga) in enumerate(zip(xs, analytic)):
        flat = t.data.reshape(-1)
        gflat = ga.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_checks is not None and flat.size > max_checks:
            idx = rng.choice(flat.size, size=max_checks, replace=False)
        input_worst = 0.0
        for i in idx:
            orig = flat[i]
            flat[i] = orig + eps
            fp = _eval(f, xs)
            flat[i] = orig - eps
            fm = _eval(f, xs)
            flat[i] = orig
            num = (fp - fm) / (2 * eps)
            fwd, bwd = (fp - f0) / eps, (f0 - fm) / eps
            if abs(fwd - bwd) > 1e-2 * max(1.0, abs(num)):
                n_skipped += 1
                continue
            a = gflat[i]
            err = float(abs(a - num) / max(abs(a), abs(num), floor))
            n_checked += 1
            input_worst = max(input_worst, err)
            if err > worst_err:
                worst_err, worst_at = err, (ti, tuple(int(j) for j in np.unravel_index(i, t.shape)))
        per_input.append(input_worst)
    return GradCheckReport(worst_err, tol, n_checked, n_skipped, worst_at, per_input)
