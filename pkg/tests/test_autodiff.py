import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from giugan import autodiff as ad
from giugan.autodiff import Tensor, backward, grad, grad_check, no_grad
from giugan.verify import oracles

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def leaf(a):
    return Tensor(np.asarray(a, dtype=float), requires_grad=True)


class TestElementwise:
    def test_relu(self):
        np.testing.assert_array_equal(ad.relu(Tensor([-1.0, 0.0, 2.0])).data, [0, 0, 2])

    def test_leaky_relu_slope(self):
        np.testing.assert_allclose(ad.leaky_relu(Tensor([-10.0, 10.0]), 0.1).data, [-1, 10])

    def test_sigmoid_zero(self):
        assert ad.sigmoid(Tensor([0.0])).data[0] == 0.5

    def test_sigmoid_extreme_inputs_stay_finite(self):
        y = ad.sigmoid(Tensor([-800.0, 800.0])).data
        assert np.all(np.isfinite(y)) and y[0] == 0.0 and y[1] == 1.0

    def test_broadcast_singleton(self):
        a, b = leaf(np.ones((2, 3))), leaf(np.arange(3.0).reshape(1, 3))
        (a * b).sum().backward()
        np.testing.assert_array_equal(b.grad.data, [[2, 2, 2]])

    def test_rank_mismatch_rejected(self):
        with pytest.raises(ValueError):
            Tensor(np.ones((2, 3))) + Tensor(np.ones(3))

    def test_division_by_zero(self):
        with pytest.raises(ZeroDivisionError):
            Tensor([1.0]) / Tensor([0.0])

    def test_log_domain(self):
        with pytest.raises(ValueError):
            ad.log(Tensor([0.0]))

    def test_sqrt_gradient_at_zero_is_zero(self):
        x = leaf([0.0, 4.0])
        ad.sqrt(x).sum().backward()
        np.testing.assert_allclose(x.grad.data, [0.0, 0.25])


class TestMatmul:
    def test_identity(self, rng):
        m = rng.standard_normal((3, 3))
        np.testing.assert_array_equal(ad.matmul(Tensor(np.eye(3)), Tensor(m)).data, m)

    def test_hand_computed(self):
        out = ad.matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[0.0], [1.0]]))
        np.testing.assert_array_equal(out.data, [[2], [4]])

    def test_frozen_loop_oracle(self, frozen):
        f = frozen["matmul"]
        np.testing.assert_allclose(ad.matmul(Tensor(f["a"]), Tensor(f["b"])).data, f["out"], atol=1e-12, rtol=0)

    def test_live_loop_oracle(self, rng):
        a, b = rng.standard_normal((4, 5)), rng.standard_normal((5, 3))
        np.testing.assert_allclose(ad.matmul(Tensor(a), Tensor(b)).data, oracles.matmul_loops(a, b), atol=1e-12)

    def test_inner_dim_mismatch(self):
        with pytest.raises(ValueError):
            ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


class TestReduce:
    def test_mean_all(self):
        assert Tensor([[1.0, 2.0], [3.0, 4.0]]).mean().item() == 2.5

    def test_sum_axis0(self):
        np.testing.assert_array_equal(Tensor([[1.0, 2.0], [3.0, 4.0]]).sum(0).data, [4, 6])

    @given(st.floats(-100, 100, allow_nan=False))
    def test_mean_of_constant(self, c):
        assert Tensor(np.full((3, 4), c)).mean().item() == pytest.approx(c, abs=1e-12)

    def test_empty_axes_is_identity(self, rng):
        x = rng.standard_normal((2, 3))
        np.testing.assert_array_equal(ad.reduce("sum", Tensor(x), ()).data, x)

    def test_bad_axis(self):
        with pytest.raises(ValueError):
            Tensor(np.ones((2, 2))).sum(5)

    def test_max_splits_gradient_over_ties(self):
        x = leaf([1.0, 3.0, 3.0])
        x.max().backward()
        np.testing.assert_allclose(x.grad.data, [0, 0.5, 0.5])


class TestShapeOps:
    def test_reshape_roundtrip(self):
        x = Tensor(np.arange(6.0))
        np.testing.assert_array_equal(ad.reshape(ad.reshape(x, (2, 3)), (6,)).data, x.data)

    def test_reshape_size_mismatch(self):
        with pytest.raises(ValueError):
            ad.reshape(Tensor(np.ones(6)), (4, 2))

    def test_permute_twice(self, rng):
        x = rng.standard_normal((3, 4))
        np.testing.assert_array_equal(Tensor(x).T.T.data, x)

    def test_pad_ring(self):
        out = ad.pad(Tensor(np.ones((2, 2))), [(1, 1), (1, 1)]).data
        assert out.shape == (4, 4)
        assert out[1:3, 1:3].sum() == 4 and out.sum() == 4

    @given(arrays(np.float64, (2, 3, 4), elements=finite), st.permutations([0, 1, 2]))
    def test_gradient_sum_conserved(self, x, perm):
        t = leaf(x)
        up = np.arange(24.0).reshape([x.shape[i] for i in perm])
        (ad.permute(t, perm) * Tensor(up)).sum().backward()
        assert t.grad.data.sum() == pytest.approx(up.sum())
        t.grad = None
        (ad.reshape(t, (4, 6)) * Tensor(up.reshape(4, 6))).sum().backward()
        assert t.grad.data.sum() == pytest.approx(up.sum())

    def test_slice_gradient_is_embedding(self):
        x = leaf(np.zeros((3, 4)))
        x[1:, ::2].sum().backward()
        np.testing.assert_array_equal(x.grad.data, [[0, 0, 0, 0], [1, 0, 1, 0], [1, 0, 1, 0]])


class TestBackward:
    def test_square(self):
        x = leaf(3.0)
        (g,) = grad(x * x, [x], create_graph=True)
        assert g.item() == 6.0
        (gg,) = grad(g * g, [x])
        assert gg.item() == 24.0

    def test_non_scalar_root(self):
        with pytest.raises(ValueError):
            backward(leaf(np.ones(3)) * 2.0)

    def test_detached_root(self):
        with pytest.raises(RuntimeError):
            Tensor([1.0]).sum().backward()

    def test_no_grad_records_nothing(self):
        x = leaf([1.0])
        with no_grad():
            y = x * 2.0
        assert not y.requires_grad

    def test_accumulates_into_leaf(self):
        x = leaf([2.0])
        (x * x).sum().backward()
        (x * x).sum().backward()
        assert x.grad.data[0] == 8.0

    def test_unreachable_input_gets_zero(self):
        x, y = leaf([1.0]), leaf([5.0])
        assert grad((x * 3.0).sum(), [y])[0].data[0] == 0.0

    def test_shared_subexpression(self):
        x = leaf([2.0])
        y = x * x
        (y + y * x).sum().backward()  # d/dx (x^2 + x^3) = 2x + 3x^2
        assert x.grad.data[0] == 16.0

    def test_deep_chain_no_recursion_limit(self):
        x = leaf([1.0])
        y = x
        for _ in range(5000):
            y = y * 1.0
        y.sum().backward()
        assert x.grad.data[0] == 1.0

    @given(arrays(np.float64, (3,), elements=st.floats(0.2, 2.0)))
    def test_second_order_matches_fd_of_first(self, x0):
        def first(arr):
            t = leaf(arr)
            (g,) = grad((ad.sigmoid(t) * t * t).sum(), [t])
            return g.data

        t = leaf(x0)
        (g,) = grad((ad.sigmoid(t) * t * t).sum(), [t], create_graph=True)
        proj = np.array([0.3, -1.0, 0.7])
        (h,) = grad((g * Tensor(proj)).sum(), [t])
        num = oracles.finite_difference(lambda a: float(first(a) @ proj), x0.copy(), 1e-5)
        np.testing.assert_allclose(h.data, num, rtol=1e-4, atol=1e-7)

    def test_deterministic_evaluation(self, rng):
        x = rng.standard_normal((4, 4))
        f = lambda: (ad.sigmoid(Tensor(x)) @ Tensor(x)).sum().item()  # noqa: E731
        assert f() == f()


class TestGradCheck:
    def test_sigmoid_sum(self, rng):
        x = leaf(rng.standard_normal((3, 3)))
        assert grad_check(lambda t: ad.sigmoid(t).sum(), x, tol=1e-4).passed

    def test_zero_function(self, rng):
        x = leaf(rng.standard_normal((2, 2)))
        rep = grad_check(lambda t: (t * 0.0).sum(), x)
        assert rep.passed and rep.max_rel_error == 0.0

    def test_relu_kink_excluded(self):
        x = leaf([0.0, 1.0, -1.0])
        rep = grad_check(lambda t: ad.relu(t).sum(), x)
        assert rep.n_skipped == 1 and rep.passed

    def test_wrong_gradient_detected(self, monkeypatch, rng):
        monkeypatch.setattr(ad.ops.Tanh, "backward", lambda self, g: (g,))
        x = leaf(rng.standard_normal(4))
        assert not grad_check(lambda t: ad.tanh(t).sum(), x).passed

    def test_nondeterministic_function(self):
        from giugan.autodiff import NonDeterministicError

        state = [0.0]

        def f(t):
            state[0] += 1.0
            return (t * state[0]).sum()

        with pytest.raises(NonDeterministicError):
            grad_check(f, leaf([1.0]))

    @given(arrays(np.float64, (2, 3), elements=finite), arrays(np.float64, (1, 3), elements=finite))
    def test_composite_ops(self, a, b):
        ta, tb = leaf(a), leaf(b)
        f = lambda x, y: (ad.tanh(x * y) + ad.sigmoid(x - y) * x).sum()  # noqa: E731
        assert grad_check(f, [ta, tb], tol=1e-4).passed
