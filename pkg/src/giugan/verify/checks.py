"""Named self-checks run by ``giugan check``.

Each check builds small random inputs, compares the library against an
oracle or a closed form, and returns a :class:`CheckResult`.  Checks look up
library functions at call time, so a patched backward rule is picked up.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .. import autodiff as ad
from .. import kernels
from ..autodiff import Tensor, grad_check
from ..nn import functional as F
from . import oracles

GRAD_TOL = 1e-4
SECOND_ORDER_TOL = 1e-3
EXACT_TOL = 1e-10


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


CHECKS: dict[str, Callable[[], CheckResult]] = {}


def check(name: str):
    def register(fn):
        def run() -> CheckResult:
            t0 = time.perf_counter()
            try:
                res = fn()
            except Exception as e:  # a crashing check is a failing check
                res = CheckResult(name, False, float("nan"), float("nan"), f"{type(e).__name__}: {e}")
            res.name = name
            res.seconds = time.perf_counter() - t0
            return res

        run.__name__ = fn.__name__
        CHECKS[name] = run
        return run

    return register


def run_checks(names: Optional[Iterable[str]] = None) -> list[CheckResult]:
    names = list(CHECKS) if names is None else list(names)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown checks: {unknown}")
    return [CHECKS[n]() for n in names]


# -- helpers ------------------------------------------------------------------------


def _rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)


def _leaf(rng, *shape, scale: float = 1.0) -> Tensor:
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)


def _below(name: str, value: float, threshold: float, detail: str = "") -> CheckResult:
    return CheckResult(name, bool(value <= threshold), float(value), threshold, detail)


def _grad(name: str, f, inputs, tol: float = GRAD_TOL, **kw) -> CheckResult:
    rep = grad_check(f, inputs, tol=tol, **kw)
    ok = rep.passed and rep.n_checked > 0
    return CheckResult(name, ok, rep.max_rel_error, tol, f"checked={rep.n_checked} skipped={rep.n_skipped}")


def _projected(fn, out_shape, rng):
    """Reduce a tensor-valued fn to a scalar with a fixed random projection."""
    proj = Tensor(rng.standard_normal(out_shape))
    return lambda *xs: (fn(*xs) * proj).sum()


def _freeze_sn(module) -> None:
    from ..specnorm import SpectralNorm

    for m in module.modules():
        if isinstance(m, SpectralNorm):
            m.training = False


def _module_grad(name: str, module, x: Tensor, rng, out_shape, max_checks: Optional[int] = 30) -> CheckResult:
    params = module.parameters()
    n_params = len(params)

    def f(*ts):
        return module(ts[n_params])

    g = _projected(f, out_shape, rng)
    return _grad(name, g, params + [x], max_checks=max_checks)


# -- gradient checks: primitives -----------------------------------------------------


@check("grad_elementwise")
def _grad_elementwise() -> CheckResult:
    rng = _rng(1)
    a, b = _leaf(rng, 3, 4), _leaf(rng, 1, 4)
    c = Tensor(rng.uniform(1.0, 2.0, (3, 1)), requires_grad=True)
    f = lambda a, b, c: ((a + b) * (a - c) / c + 2.0 * a - b / 3.0).sum()  # noqa: E731
    return _grad("", f, [a, b, c])


@check("grad_relu")
def _grad_relu() -> CheckResult:
    rng = _rng(2)
    x = _leaf(rng, 4, 5)
    return _grad("", _projected(ad.relu, (4, 5), rng), [x])


@check("grad_leaky_relu")
def _grad_leaky() -> CheckResult:
    rng = _rng(3)
    x = _leaf(rng, 4, 5)
    return _grad("", _projected(lambda t: ad.leaky_relu(t, 0.1), (4, 5), rng), [x])


@check("grad_sigmoid")
def _grad_sigmoid() -> CheckResult:
    rng = _rng(4)
    x = _leaf(rng, 4, 5, scale=2.0)
    return _grad("", _projected(ad.sigmoid, (4, 5), rng), [x])


@check("grad_tanh")
def _grad_tanh() -> CheckResult:
    rng = _rng(5)
    x = _leaf(rng, 4, 5)
    return _grad("", _projected(ad.tanh, (4, 5), rng), [x])


@check("grad_exp_log_sqrt")
def _grad_exp_log() -> CheckResult:
    rng = _rng(6)
    x = Tensor(rng.uniform(0.5, 2.0, (3, 4)), requires_grad=True)
    f = _projected(lambda t: ad.log(t) + ad.exp(t) * 0.1 + ad.sqrt(t) + ad.square(t), (3, 4), rng)
    return _grad("", f, [x])


@check("grad_reductions")
def _grad_reductions() -> CheckResult:
    rng = _rng(7)
    x = _leaf(rng, 2, 3, 4)
    w = Tensor(rng.standard_normal((1, 3)))

    def f(t):
        return (t.sum(2) * (t.mean((0, 2)).reshape(1, 3) * w)).sum() + t.max(2).square().sum()

    return _grad("", f, [x])


@check("grad_matmul")
def _grad_matmul() -> CheckResult:
    rng = _rng(8)
    a, b = _leaf(rng, 3, 4), _leaf(rng, 4, 2)
    return _grad("", _projected(ad.matmul, (3, 2), rng), [a, b])


@check("grad_shape_ops")
def _grad_shape_ops() -> CheckResult:
    rng = _rng(9)
    a, b = _leaf(rng, 2, 3, 4), _leaf(rng, 2, 1, 4)

    def f(a, b):
        y = ad.concat([a, b], axis=1)
        y = ad.permute(ad.reshape(y, (2, 16)), (1, 0))
        y = ad.pad(y, [(1, 0), (0, 2)])[2:10, 1:3]
        return y.square().sum()

    return _grad("", f, [a, b])


# -- gradient checks: layers ----------------------------------------------------------


@check("grad_linear")
def _grad_linear() -> CheckResult:
    from ..nn import Linear

    rng = _rng(10)
    layer = Linear(5, 3, rng=rng)
    return _module_grad("", layer, _leaf(rng, 4, 5), rng, (4, 3), max_checks=None)


@check("grad_conv2d")
def _grad_conv() -> CheckResult:
    from ..nn import Conv2d

    rng = _rng(11)
    layer = Conv2d(2, 3, 3, stride=2, padding=1, rng=rng)
    layer.weight.data *= 10
    return _module_grad("", layer, _leaf(rng, 2, 2, 5, 5), rng, (2, 3, 3, 3))


@check("grad_conv_transpose2d")
def _grad_convt() -> CheckResult:
    from ..nn import ConvTranspose2d

    rng = _rng(12)
    layer = ConvTranspose2d(3, 2, 4, stride=2, padding=1, rng=rng)
    layer.weight.data *= 10
    return _module_grad("", layer, _leaf(rng, 2, 3, 3, 3), rng, (2, 2, 6, 6))


@check("grad_batchnorm")
def _grad_bn() -> CheckResult:
    from ..nn import BatchNorm

    rng = _rng(13)
    layer = BatchNorm(3)
    layer.gamma.data[:] = rng.uniform(0.5, 1.5, 3)
    layer.beta.data[:] = rng.standard_normal(3)
    return _module_grad("", layer, _leaf(rng, 4, 3, 2, 2), rng, (4, 3, 2, 2), max_checks=None)


@check("grad_rbn")
def _grad_rbn() -> CheckResult:
    from ..rbn import RBN

    rng = _rng(14)
    layer = RBN(3)
    for p in (layer.w_m, layer.w_v, layer.w_b):
        p.data[...] = rng.standard_normal(p.shape) * 0.5
    return _module_grad("", layer, _leaf(rng, 3, 3, 3, 3), rng, (3, 3, 3, 3), max_checks=None)


@check("grad_se")
def _grad_se() -> CheckResult:
    from ..giu import SEBlock

    rng = _rng(15)
    block = SEBlock(4, r=2, rng=rng)
    for p in block.parameters():
        p.data *= 20
    x = _leaf(rng, 2, 4, 3, 3)
    f = lambda *ts: block(ts[-1])[0]  # noqa: E731
    return _grad("", _projected(f, (2, 4, 3, 3), rng), block.parameters() + [x])


@check("grad_involution")
def _grad_involution() -> CheckResult:
    from ..giu import involution_apply

    rng = _rng(16)
    x, ker = _leaf(rng, 2, 4, 4, 4), _leaf(rng, 2, 2, 9, 4, 4)
    return _grad("", _projected(involution_apply, (2, 4, 4, 4), rng), [x, ker], max_checks=40)


@check("grad_giu")
def _grad_giu() -> CheckResult:
    from ..giu import GIU

    rng = _rng(17)
    with np.errstate(all="ignore"):
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            block = GIU(4, 3, groups=2, se_r=2, inv_r=2, sigma_mid=True, rng=rng)
    for p in block.parameters():
        p.data += rng.standard_normal(p.shape) * 0.3
    return _module_grad("", block, _leaf(rng, 2, 4, 3, 3), rng, (2, 4, 3, 3), max_checks=20)


@check("grad_spectral_norm")
def _grad_sn() -> CheckResult:
    from ..nn import Conv2d

    rng = _rng(18)
    layer = Conv2d(2, 3, 3, padding=1, spectral_norm=True, rng=rng)
    layer(Tensor(rng.standard_normal((1, 2, 4, 4))))  # one power-iteration step
    _freeze_sn(layer)
    return _module_grad("", layer, _leaf(rng, 2, 2, 4, 4), rng, (2, 3, 4, 4), max_checks=30)


# -- gradient penalty ---------------------------------------------------------------------


def _tiny_critic(rng):
    from ..nn import Linear, Module

    class Critic(Module):
        def __init__(self):
            super().__init__()
            self.fc1 = Linear(4, 3, bias=False, rng=rng)
            self.fc2 = Linear(3, 1, bias=False, rng=rng)
            self.fc1.weight.data[...] = rng.standard_normal((3, 4))
            self.fc2.weight.data[...] = rng.standard_normal((1, 3))

        def forward(self, x):
            return self.fc2(ad.leaky_relu(self.fc1(x), 0.1))

    return Critic()


@check("gp_second_order")
def _gp_second_order() -> CheckResult:
    from ..gan.losses import gradient_penalty

    rng = _rng(19)
    D = _tiny_critic(rng)
    real, fake = rng.standard_normal((5, 4)), rng.standard_normal((5, 4))
    eps = rng.uniform(size=(5, 1))
    f = lambda *ps: gradient_penalty(D, real, fake, 10.0, eps=eps)  # noqa: E731
    return _grad("", f, D.parameters(), tol=SECOND_ORDER_TOL)


@check("gp_value")
def _gp_value() -> CheckResult:
    from ..gan.losses import gradient_penalty, interpolate

    rng = _rng(20)
    D = _tiny_critic(rng)
    real, fake = rng.standard_normal((5, 4)), rng.standard_normal((5, 4))
    eps = rng.uniform(size=(5, 1))
    got = gradient_penalty(D, real, fake, 10.0, eps=eps).item()
    want = oracles.penalty_fd(interpolate(real, fake, eps), D.fc1.weight.data, D.fc2.weight.data, 10.0)
    return _below("", abs(got - want), 1e-6, f"penalty={got:.10g}")


# -- forward oracles ------------------------------------------------------------------------


@check("conv2d_oracle")
def _conv_oracle() -> CheckResult:
    rng = _rng(21)
    worst = 0.0
    for stride, pad in ((1, 0), (1, 1), (2, 1)):
        x, w, b = rng.standard_normal((2, 3, 5, 5)), rng.standard_normal((4, 3, 3, 3)), rng.standard_normal(4)
        got = F.conv2d(Tensor(x), Tensor(w), Tensor(b), stride, pad).data
        worst = max(worst, float(np.max(np.abs(got - oracles.conv2d_loops(x, w, b, stride, pad)))))
    return _below("", worst, EXACT_TOL)


@check("conv_transpose2d_oracle")
def _convt_oracle() -> CheckResult:
    """Against the scatter loops and against the transpose of the explicit conv matrix."""
    rng = _rng(22)
    x, w = rng.standard_normal((1, 3, 3, 3)), rng.standard_normal((3, 2, 4, 4))
    got = F.conv_transpose2d(Tensor(x), Tensor(w), None, 2, 1).data
    err1 = float(np.max(np.abs(got - oracles.conv_transpose2d_loops(x, w, None, 2, 1))))
    # conv2d with weight w (C_out=3, C_in=2) maps 2x6x6 -> 3x3x3; its transpose is convT with w
    mat = oracles.conv_matrix(w, (2, 6, 6), stride=2, pad=1)
    err2 = float(np.max(np.abs(got.reshape(-1) - mat.T @ x.reshape(-1))))
    return _below("", max(err1, err2), EXACT_TOL)


@check("unfold_oracle")
def _unfold_oracle() -> CheckResult:
    rng = _rng(23)
    worst = 0.0
    for k in (1, 3, 5):
        x = rng.standard_normal((2, 3, 4, 5))
        worst = max(worst, float(np.max(np.abs(F.unfold(Tensor(x), k).data - oracles.unfold_loops(x, k)))))
    return _below("", worst, 0.0)


@check("involution_oracle")
def _involution_oracle() -> CheckResult:
    from ..giu import involution_apply

    rng = _rng(24)
    worst = 0.0
    for k in (1, 3):
        for g in (1, 2):
            for c in (2, 4, 8):
                x = rng.standard_normal((2, c, 4, 4))
                ker = rng.standard_normal((2, g, k * k, 4, 4))
                got = involution_apply(Tensor(x), Tensor(ker)).data
                worst = max(worst, float(np.max(np.abs(got - oracles.involution_loops(x, ker)))))
    x = rng.standard_normal((2, 4, 5, 5))
    ident = involution_apply(Tensor(x), Tensor(np.ones((2, 2, 1, 5, 5)))).data
    delta = np.zeros((2, 1, 9, 5, 5))
    delta[:, :, 4] = 1.0
    centered = involution_apply(Tensor(x), Tensor(delta)).data
    exact = np.array_equal(ident, x) and np.array_equal(centered, x)
    res = _below("", worst, EXACT_TOL, "identity kernels exact" if exact else "identity kernels NOT exact")
    res.passed = res.passed and exact
    return res


@check("involution_kernel_oracle")
def _kernel_oracle() -> CheckResult:
    from ..giu import InvolutionKernel

    rng = _rng(25)
    gen = InvolutionKernel(8, 3, groups=2, r=2, sigma_mid=False, rng=rng)
    x = rng.standard_normal((2, 8, 3, 3))
    got = gen(Tensor(x)).data
    w0, w1 = gen.w0.weight.data, gen.w1.weight.data
    worst = 0.0
    for n in range(2):
        for i in range(3):
            for j in range(3):
                want = oracles.involution_kernel_pixel(x[n, :, i, j], w0, w1, 3, 2)
                worst = max(worst, float(np.max(np.abs(got[n, :, :, i, j] - want))))
    return _below("", worst, EXACT_TOL)


# -- RBN identities ---------------------------------------------------------------------------


def _random_rbn(rng, c: int):
    from ..rbn import RBN

    layer = RBN(c)
    for p in (layer.w_m, layer.w_v, layer.w_b, layer.gamma, layer.beta):
        p.data[...] = rng.standard_normal(p.shape)
    return layer


@check("rbn_shift_identity")
def _rbn_shift() -> CheckResult:
    from ..rbn import rbn_centering_shift, rbn_parts

    rng = _rng(26)
    layer = _random_rbn(rng, 4)
    x = rng.normal(1.5, 2.0, (5, 4, 3, 3))
    parts = rbn_parts(Tensor(x), layer, True)
    center = lambda a: a - a.mean(axis=(0, 2, 3), keepdims=True)  # noqa: E731
    lhs = center(parts.centered_input.data) - center(x)
    rhs = rbn_centering_shift(Tensor(x), layer.w_m).data
    return _below("", float(np.max(np.abs(lhs - rhs))), EXACT_TOL)


@check("rbn_variance_contraction")
def _rbn_contraction() -> CheckResult:
    from ..rbn import rbn_parts

    rng = _rng(27)
    layer = _random_rbn(rng, 4)
    parts = rbn_parts(Tensor(rng.standard_normal((6, 4, 3, 3)) * 3.0), layer, True)
    xs, xcs = parts.standardized.data, parts.calibrated.data
    tau = float(parts.gate.data.max())
    v_s, v_cs = xs.var(axis=(0, 2, 3)), xcs.var(axis=(0, 2, 3))
    ratio = float(np.max(v_cs / (tau * tau * v_s)))
    strict = bool(np.all(v_cs < v_s))
    return CheckResult("", ratio <= 1.0 + 1e-12 and strict, ratio, 1.0, f"tau={tau:.4f} strict={strict}")


# -- spectral norm -----------------------------------------------------------------------------


@check("spectral_norm_unit")
def _sn_unit() -> CheckResult:
    from ..metrics import symmetric_eigendecomp
    from ..specnorm import SpectralNorm, spectral_norm_apply

    rng = _rng(28)
    worst = 0.0
    for shape in ((16, 8), (32, 18)):
        w = rng.standard_normal(shape)
        state = SpectralNorm(shape, rng=rng)
        wn = spectral_norm_apply(Tensor(w), state, True, n_iter=2000).data
        worst = max(worst, abs(oracles.largest_singular_value(wn, symmetric_eigendecomp) - 1.0))
        for c in (0.1, 10.0):
            scaled = spectral_norm_apply(Tensor(c * w), state, False).data
            worst = max(worst, float(np.max(np.abs(scaled - wn))))
    return _below("", worst, 1e-4)


# -- metrics closed forms ------------------------------------------------------------------------


@check("fid_identical")
def _fid_identical() -> CheckResult:
    from ..metrics import fid

    feats = _rng(29).standard_normal((300, 6))
    return _below("", abs(fid(feats, feats)), 1e-8)


@check("fid_mean_shift")
def _fid_shift() -> CheckResult:
    from ..metrics import fid

    rng = _rng(30)
    feats = rng.standard_normal((300, 6)) @ rng.standard_normal((6, 6))
    d = rng.standard_normal(6)
    return _below("", abs(fid(feats, feats + d) - float(d @ d)), 1e-8)


@check("jacobi_residual")
def _jacobi() -> CheckResult:
    from ..metrics import symmetric_eigendecomp

    rng = _rng(31)
    a = rng.standard_normal((12, 12))
    a = a + a.T
    vals, vecs = symmetric_eigendecomp(a)
    resid = float(np.max(np.abs(vecs @ np.diag(vals) @ vecs.T - a)))
    orth = float(np.max(np.abs(vecs.T @ vecs - np.eye(12))))
    return _below("", max(resid, orth), 1e-9)


@check("inception_score_bounds")
def _is_bounds() -> CheckResult:
    from ..metrics import inception_score_from_probs

    labels = 10
    flat = np.full((200, labels), 1.0 / labels)
    onehot = np.eye(labels)[np.arange(200) % labels]
    lo, _ = inception_score_from_probs(flat)
    hi, _ = inception_score_from_probs(onehot)
    return _below("", max(abs(lo - 1.0), abs(hi - labels)), 1e-8)


# -- plumbing -------------------------------------------------------------------------------------


@check("kernel_backends_agree")
def _backends() -> CheckResult:
    from ..kernels import _fallback

    rng = _rng(32)
    x = rng.standard_normal((2, 3, 6, 5))
    worst = 0.0
    for k, s, p in ((3, 1, 1), (4, 2, 1), (1, 1, 0)):
        cols = kernels.im2col(x, k, s, p)
        worst = max(worst, float(np.max(np.abs(cols - _fallback.im2col(x, k, s, p)))))
        back = kernels.col2im(cols, 6, 5, s, p)
        worst = max(worst, float(np.max(np.abs(back - _fallback.col2im(cols, 6, 5, s, p)))))
    return _below("", worst, 0.0, f"backend={kernels.BACKEND}")


@check("checkpoint_roundtrip")
def _ckpt() -> CheckResult:
    import tempfile
    from pathlib import Path

    from ..checkpoint import load_checkpoint, save_checkpoint

    rng = _rng(33)
    arrays = {"a": rng.standard_normal((3, 4)), "b": np.arange(5, dtype=np.int64)}
    with tempfile.TemporaryDirectory() as d:
        path = save_checkpoint(Path(d) / "x.giuc", arrays, {"kind": "test"})
        back, manifest = load_checkpoint(path)
    same = all(np.array_equal(arrays[k], back[k]) and arrays[k].dtype == back[k].dtype for k in arrays)
    return CheckResult("", same and manifest["kind"] == "test", 0.0 if same else 1.0, 0.0)
