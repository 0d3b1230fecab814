import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from giugan.autodiff import Tensor, grad_check
from giugan.metrics import symmetric_eigendecomp
from giugan.nn import Conv2d, ConvTranspose2d
from giugan.specnorm import SpectralNorm, spectral_norm_apply
from giugan.verify import oracles


def top_sv(m):
    return oracles.largest_singular_value(m, symmetric_eigendecomp)


def test_diagonal(rng):
    state = SpectralNorm((2, 2), rng=rng)
    out = spectral_norm_apply(Tensor(np.diag([3.0, 1.0])), state, True, n_iter=60).data
    assert state.sigma == pytest.approx(3.0, abs=1e-12)
    np.testing.assert_allclose(out, np.diag([1.0, 1.0 / 3.0]), atol=1e-12)


def test_orthogonal_fixed(rng):
    q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    state = SpectralNorm((5, 5), rng=rng)
    out = spectral_norm_apply(Tensor(q), state, True, n_iter=5).data
    np.testing.assert_allclose(out, q, atol=1e-12)


def test_frozen_matrix_fifty_iterations(frozen, rng):
    w = frozen["singular"]["w"]
    state = SpectralNorm(w.shape, rng=rng)
    out = spectral_norm_apply(Tensor(w), state, True, n_iter=50).data
    assert state.sigma == pytest.approx(top_sv(w), abs=1e-6)
    assert state.sigma == pytest.approx(frozen["singular"]["sigma_max"], abs=1e-6)
    assert abs(top_sv(out) - 1.0) <= 1e-6


@given(st.integers(0, 2**31), st.sampled_from([(16, 8), (32, 18), (4, 27)]))
def test_unit_spectral_norm_after_convergence(seed, shape):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(shape)
    state = SpectralNorm(shape, rng=rng)
    out = spectral_norm_apply(Tensor(w), state, True, n_iter=3000).data
    assert abs(top_sv(out) - 1.0) <= 1e-4


@given(st.integers(0, 2**31), st.floats(0.01, 100))
def test_scale_equivariance_and_unit_u(seed, c):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((6, 4))
    state = SpectralNorm((6, 4), rng=rng)
    base = spectral_norm_apply(Tensor(w), state, True, n_iter=500).data
    assert np.linalg.norm(state.u) == pytest.approx(1.0, abs=1e-12)
    scaled = spectral_norm_apply(Tensor(c * w), state, True).data
    assert np.linalg.norm(state.u) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(scaled, base, atol=1e-4)


def test_eval_reuses_vectors(rng):
    state = SpectralNorm((3, 4), rng=rng)
    w = Tensor(rng.standard_normal((3, 4)))
    spectral_norm_apply(w, state, True)
    u = state.u.copy()
    state.eval()
    state(w)
    np.testing.assert_array_equal(state.u, u)


def test_degenerate_weight(rng):
    state = SpectralNorm((3, 3), rng=rng)
    w = Tensor(np.zeros((3, 3)))
    out = spectral_norm_apply(w, state, True)
    assert state.degenerate and out is w


def test_conv_weight_view(rng):
    layer = Conv2d(3, 5, 3, spectral_norm=True, rng=rng)
    assert (layer.sn.rows, layer.sn.cols) == (5, 27)
    layer_t = ConvTranspose2d(3, 5, 4, spectral_norm=True, rng=rng)
    assert (layer_t.sn.rows, layer_t.sn.cols) == (3, 80)


def test_gradient_through_normalized_weight(rng):
    layer = Conv2d(2, 3, 3, padding=1, spectral_norm=True, rng=rng)
    layer(Tensor(rng.standard_normal((1, 2, 4, 4))))
    layer.sn.eval()
    x = Tensor(rng.standard_normal((2, 2, 4, 4)), requires_grad=True)
    proj = Tensor(rng.standard_normal((2, 3, 4, 4)))
    f = lambda *ts: (layer(ts[-1]) * proj).sum()  # noqa: E731
    assert grad_check(f, layer.parameters() + [x], tol=1e-4).passed
