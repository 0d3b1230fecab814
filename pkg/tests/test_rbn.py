import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from giugan.autodiff import Tensor, grad_check
from giugan.nn import functional as F
from giugan.rbn import RBN, rbn_centering_shift, rbn_forward, rbn_parts


def bn_plain(x):
    return F.standardize(Tensor(x), np.zeros(x.shape[1]), np.ones(x.shape[1]), True).data


def random_rbn(rng, c=3, scale=1.0):
    layer = RBN(c)
    for p in (layer.w_m, layer.w_v, layer.w_b, layer.gamma, layer.beta):
        p.data[...] = rng.standard_normal(p.shape) * scale
    return layer


def test_parameter_shapes():
    layer = RBN(5)
    for p in (layer.w_m, layer.w_v, layer.w_b):
        assert p.shape == (1, 5, 1, 1)


def test_defaults_are_half_bn(rng):
    x = rng.standard_normal((4, 3, 3, 3))
    np.testing.assert_allclose(RBN(3)(Tensor(x)).data, 0.5 * bn_plain(x), atol=1e-14)


def test_calibrations_collapse_to_constant_gate(rng):
    x = rng.standard_normal((4, 3, 3, 3))
    layer = RBN(3)
    layer.w_b.data[...] = rng.standard_normal((1, 3, 1, 1))
    gate = 1 / (1 + np.exp(-layer.w_b.data))
    np.testing.assert_allclose(layer(Tensor(x)).data, bn_plain(x) * gate, atol=1e-14)


def test_affine_absorbs_gate(rng):
    x = rng.standard_normal((4, 3, 3, 3))
    layer = RBN(3)
    layer.w_b.data[...] = rng.standard_normal((1, 3, 1, 1))
    gamma = rng.uniform(0.5, 2, 3)
    layer.gamma.data[:] = gamma / (1 / (1 + np.exp(-layer.w_b.data.reshape(3))))
    np.testing.assert_allclose(layer(Tensor(x)).data, bn_plain(x) * gamma[None, :, None, None], atol=1e-12)


def test_centered_mean_identity(rng):
    layer = random_rbn(rng)
    x = rng.normal(2, 1, (5, 3, 4, 4))
    parts = rbn_parts(Tensor(x), layer, True)
    want = (1 + layer.w_m.data.reshape(3)) * x.mean((0, 2, 3))
    np.testing.assert_allclose(parts.centered_input.data.mean((0, 2, 3)), want, atol=1e-12)


def test_shift_zero_weight(rng):
    assert np.all(rbn_centering_shift(Tensor(rng.standard_normal((3, 2, 2, 2))), Tensor(np.zeros((1, 2, 1, 1)))).data == 0)


def test_shift_constant_input(rng):
    out = rbn_centering_shift(Tensor(np.full((3, 2, 4, 4), 1.7)), Tensor(rng.standard_normal((1, 2, 1, 1))))
    np.testing.assert_allclose(out.data, 0.0, atol=1e-15)


@given(st.integers(0, 2**31), st.floats(-3, 3), st.floats(0.1, 5))
def test_shift_identity(seed, loc, scale):
    rng = np.random.default_rng(seed)
    layer = random_rbn(rng)
    x = rng.normal(loc, scale, (4, 3, 3, 3))
    parts = rbn_parts(Tensor(x), layer, True)
    center = lambda a: a - a.mean(axis=(0, 2, 3), keepdims=True)  # noqa: E731
    lhs = center(parts.centered_input.data) - center(x)
    shift = np.broadcast_to(rbn_centering_shift(Tensor(x), layer.w_m).data, lhs.shape)
    np.testing.assert_allclose(lhs, shift, atol=1e-10, rtol=0)


@given(st.integers(0, 2**31), st.floats(0.1, 5))
def test_variance_contraction(seed, weight_scale):
    rng = np.random.default_rng(seed)
    layer = random_rbn(rng, scale=weight_scale)
    parts = rbn_parts(Tensor(rng.standard_normal((6, 3, 3, 3)) * 2), layer, True)
    xs, xcs = parts.standardized.data, parts.calibrated.data
    tau = parts.gate.data.max()
    v_s, v_cs = xs.var((0, 2, 3)), xcs.var((0, 2, 3))
    assert np.all(v_cs <= tau * tau * v_s * (1 + 1e-12))
    assert np.all(v_cs < v_s)


def test_eval_uses_running_stats(rng):
    layer = random_rbn(rng)
    x = rng.standard_normal((4, 3, 2, 2))
    layer(Tensor(x))
    layer.eval()
    a = rbn_forward(Tensor(x[:1]), layer, False).data
    b = layer(Tensor(x[:1])).data
    np.testing.assert_array_equal(a, b)


def test_needs_feature_maps():
    with pytest.raises(ValueError):
        RBN(3)(Tensor(np.ones((4, 3))))


def test_gradients_all_parameters(rng):
    layer = random_rbn(rng, scale=0.5)
    x = Tensor(rng.standard_normal((3, 3, 3, 3)), requires_grad=True)
    proj = Tensor(rng.standard_normal((3, 3, 3, 3)))
    f = lambda *ts: (layer(ts[-1]) * proj).sum()  # noqa: E731
    rep = grad_check(f, layer.parameters() + [x], tol=1e-4)
    assert rep.passed and len(rep.per_input) == 6
