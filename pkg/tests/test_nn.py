import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from giugan.autodiff import Tensor, grad_check
from giugan.nn import BatchNorm, Conv2d, ConvTranspose2d, Linear, Sequential, Activation
from giugan.nn import functional as F
from giugan.verify import oracles


def leaf(a):
    return Tensor(np.asarray(a, dtype=float), requires_grad=True)


class TestConv2d:
    def test_counting(self):
        out = F.conv2d(Tensor(np.ones((1, 1, 3, 3))), Tensor(np.ones((1, 1, 3, 3))), None, 1, 1)
        assert out.data[0, 0, 1, 1] == 9 and out.data[0, 0, 0, 0] == 4

    def test_delta_kernel(self, rng):
        x = rng.standard_normal((1, 2, 5, 5))
        w = np.zeros((2, 2, 3, 3))
        w[0, 0, 1, 1] = w[1, 1, 1, 1] = 1.0
        np.testing.assert_array_equal(F.conv2d(Tensor(x), Tensor(w), None, 1, 1).data, x)

    def test_frozen_oracle(self, frozen):
        f = frozen["conv2d"]
        out = F.conv2d(Tensor(f["x"]), Tensor(f["w"]), Tensor(f["b"]), f["stride"], f["pad"]).data
        np.testing.assert_allclose(out, f["out"], atol=1e-10, rtol=0)

    @given(st.integers(1, 2), st.integers(1, 3), st.integers(1, 3), st.sampled_from([1, 3]),
           st.integers(1, 2), st.integers(0, 1), st.integers(0, 2**31))
    def test_loop_oracle(self, n, ci, co, k, s, p, seed):
        rng = np.random.default_rng(seed)
        x, w, b = rng.standard_normal((n, ci, 5, 4)), rng.standard_normal((co, ci, k, k)), rng.standard_normal(co)
        got = F.conv2d(Tensor(x), Tensor(w), Tensor(b), s, p).data
        np.testing.assert_allclose(got, oracles.conv2d_loops(x, w, b, s, p), atol=1e-10, rtol=0)

    def test_channel_mismatch(self):
        with pytest.raises(ValueError):
            F.conv2d(Tensor(np.ones((1, 2, 4, 4))), Tensor(np.ones((1, 3, 3, 3))))

    def test_non_positive_extent(self):
        with pytest.raises(ValueError):
            F.conv2d(Tensor(np.ones((1, 1, 2, 2))), Tensor(np.ones((1, 1, 5, 5))))

    def test_gradients(self, rng):
        layer = Conv2d(2, 3, 3, 2, 1, rng=rng)
        layer.weight.data *= 10
        x = leaf(rng.standard_normal((2, 2, 5, 5)))
        proj = Tensor(rng.standard_normal((2, 3, 3, 3)))
        f = lambda *ts: (layer(ts[-1]) * proj).sum()  # noqa: E731
        assert grad_check(f, layer.parameters() + [x], tol=1e-4).passed


class TestConvTranspose2d:
    def test_upsampling_shape(self):
        out = F.conv_transpose2d(Tensor(np.ones((1, 2, 4, 4))), Tensor(np.ones((2, 3, 4, 4))), None, 2, 1)
        assert out.shape == (1, 3, 8, 8)

    def test_adjoint_shapes(self, rng):
        x = rng.standard_normal((1, 3, 8, 8))
        down = F.conv2d(Tensor(x), Tensor(rng.standard_normal((4, 3, 4, 4))), None, 2, 1)
        up = F.conv_transpose2d(down, Tensor(rng.standard_normal((4, 3, 4, 4))), None, 2, 1)
        assert up.shape == x.shape

    def test_frozen_scatter_oracle(self, frozen):
        f = frozen["conv_transpose2d"]
        out = F.conv_transpose2d(Tensor(f["x"]), Tensor(f["w"]), None, f["stride"], f["pad"]).data
        np.testing.assert_allclose(out, f["out"], atol=1e-10, rtol=0)

    def test_equals_transposed_conv_matrix(self, rng):
        x, w = rng.standard_normal((1, 2, 3, 3)), rng.standard_normal((2, 3, 4, 4))
        got = F.conv_transpose2d(Tensor(x), Tensor(w), None, 2, 1).data
        mat = oracles.conv_matrix(w, (3, 6, 6), 2, 1)
        np.testing.assert_allclose(got.reshape(-1), mat.T @ x.reshape(-1), atol=1e-10)

    def test_gradients(self, rng):
        layer = ConvTranspose2d(3, 2, 4, 2, 1, rng=rng)
        layer.weight.data *= 10
        x = leaf(rng.standard_normal((2, 3, 3, 3)))
        proj = Tensor(rng.standard_normal((2, 2, 6, 6)))
        f = lambda *ts: (layer(ts[-1]) * proj).sum()  # noqa: E731
        assert grad_check(f, layer.parameters() + [x], tol=1e-4, max_checks=40).passed


class TestLinear:
    def test_identity(self, rng):
        x = rng.standard_normal((3, 4))
        out = F.linear(Tensor(x), Tensor(np.eye(4)), Tensor(np.zeros(4)))
        np.testing.assert_array_equal(out.data, x)

    def test_ones(self):
        out = F.linear(Tensor([[1.0, 2.0, 3.0]]), Tensor(np.ones((2, 3))), None)
        np.testing.assert_array_equal(out.data, [[6, 6]])

    def test_matmul_oracle(self, rng):
        x, w, b = rng.standard_normal((5, 4)), rng.standard_normal((3, 4)), rng.standard_normal(3)
        want = oracles.matmul_loops(x, w.T) + b
        np.testing.assert_allclose(F.linear(Tensor(x), Tensor(w), Tensor(b)).data, want, atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            F.linear(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 4))))

    def test_flattens_feature_maps(self, rng):
        layer = Linear(12, 2, rng=rng)
        assert layer(Tensor(rng.standard_normal((5, 3, 2, 2)))).shape == (5, 2)


class TestBatchNorm:
    def test_standardizes(self, rng):
        x = rng.normal(3, 2, (8, 3, 4, 4))
        out = F.standardize(Tensor(x), np.zeros(3), np.ones(3), True, eps=1e-5).data
        assert np.max(np.abs(out.mean((0, 2, 3)))) < 1e-8
        s2 = x.var((0, 2, 3))
        np.testing.assert_allclose(out.var((0, 2, 3)), s2 / (s2 + 1e-5), rtol=1e-12)

    def test_variance_band_when_eps_is_negligible(self, rng):
        # the eps shrink is eps / (var + eps); below 1e-6 once var >= 10 at eps = 1e-5
        out = F.standardize(Tensor(rng.normal(0, 5, (8, 3, 4, 4))), np.zeros(3), np.ones(3), True).data
        var = out.var((0, 2, 3))
        assert np.all(var <= 1.0) and np.all(var >= 1 - 1e-6)

    def test_constant_input(self):
        bn = BatchNorm(2)
        out = bn(Tensor(np.full((4, 2, 3, 3), 7.0))).data
        np.testing.assert_array_equal(out, 0.0)

    def test_frozen_two_pass_oracle(self, frozen):
        f = frozen["batch_norm"]
        out = F.standardize(Tensor(f["x"]), np.zeros(3), np.ones(3), True).data
        np.testing.assert_allclose(out, f["out"], atol=1e-10, rtol=0)

    def test_running_stats_and_eval(self, rng):
        bn = BatchNorm(2, momentum=0.5)
        x = rng.normal(4, 3, (6, 2, 2, 2))
        bn(Tensor(x))
        np.testing.assert_allclose(bn.running_mean, 0.5 * x.mean((0, 2, 3)))
        np.testing.assert_allclose(bn.running_var, 0.5 + 0.5 * x.var((0, 2, 3), ddof=1))
        bn.eval()
        before = bn.running_mean.copy()
        bn(Tensor(x))
        np.testing.assert_array_equal(bn.running_mean, before)

    def test_batch_of_one_rejected(self):
        with pytest.raises(ValueError):
            BatchNorm(2)(Tensor(np.ones((1, 2))))

    def test_gradients(self, rng):
        bn = BatchNorm(3)
        bn.gamma.data[:] = [0.5, 1.0, 2.0]
        x = leaf(rng.standard_normal((4, 3, 2, 2)))
        proj = Tensor(rng.standard_normal((4, 3, 2, 2)))
        f = lambda *ts: (bn(ts[-1]) * proj).sum()  # noqa: E731
        assert grad_check(f, bn.parameters() + [x], tol=1e-4).passed


class TestPoolingAndUnfold:
    def test_gap_constant(self):
        assert np.all(F.global_avg_pool(Tensor(np.full((2, 3, 4, 4), 1.5))).data == 1.5)

    def test_gap_value(self):
        assert F.global_avg_pool(Tensor([[[[1.0, 2.0], [3.0, 4.0]]]])).data[0, 0] == 2.5

    def test_gap_equals_mean(self, rng):
        x = rng.standard_normal((2, 3, 4, 5))
        np.testing.assert_array_equal(F.global_avg_pool(Tensor(x)).data, Tensor(x).mean((2, 3)).data)

    def test_unfold_k1(self, rng):
        x = rng.standard_normal((2, 3, 4, 4))
        out = F.unfold(Tensor(x), 1).data
        assert out.shape == (2, 3, 1, 4, 4)
        np.testing.assert_array_equal(out[:, :, 0], x)

    def test_unfold_corner_padding(self):
        out = F.unfold(Tensor(np.ones((1, 1, 2, 2))), 3).data
        corner = out[0, 0, :, 0, 0]
        assert (corner == 0).sum() == 5 and (corner == 1).sum() == 4

    def test_unfold_frozen_oracle(self, frozen):
        f = frozen["unfold"]
        np.testing.assert_array_equal(F.unfold(Tensor(f["x"]), int(f["k"])).data, f["out"])

    def test_unfold_even_kernel(self):
        with pytest.raises(ValueError):
            F.unfold(Tensor(np.ones((1, 1, 4, 4))), 2)

    @given(st.integers(0, 2**31))
    def test_unfold_linear(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.standard_normal((1, 2, 3, 4)), rng.standard_normal((1, 2, 3, 4))
        lhs = F.unfold(Tensor(a + b), 3).data
        rhs = F.unfold(Tensor(a), 3).data + F.unfold(Tensor(b), 3).data
        np.testing.assert_allclose(lhs, rhs, atol=1e-14)
        assert F.unfold(Tensor(a), 1).data.sum() == pytest.approx(a.sum())


class TestModule:
    def test_state_dict_roundtrip(self, rng):
        net = Sequential(Conv2d(1, 2, 3, 1, 1, spectral_norm=True, rng=rng), BatchNorm(2), Activation("relu"))
        state = net.state_dict()
        other = Sequential(Conv2d(1, 2, 3, 1, 1, spectral_norm=True, rng=np.random.default_rng(9)),
                           BatchNorm(2), Activation("relu"))
        other.load_state_dict(state)
        x = Tensor(rng.standard_normal((2, 1, 4, 4)))
        net.eval(), other.eval()
        np.testing.assert_array_equal(net(x).data, other(x).data)

    def test_strict_load(self, rng):
        net = Linear(2, 2, rng=rng)
        with pytest.raises(KeyError):
            net.load_state_dict({"weight": np.zeros((2, 2))})

    def test_unknown_activation(self):
        with pytest.raises(ValueError):
            Activation("swish")
