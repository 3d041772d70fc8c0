"""Forward-value tests for the tensor ops: hand oracles and contracts."""

import numpy as np
import pytest

from facemtl.autodiff import DomainError, ShapeError, Tensor, ops, precision


class TestMatmul:
    def test_identity(self):
        eye = Tensor(np.eye(2))
        m = Tensor([[1.0, 2.0], [3.0, 4.0]])
        out = ops.matmul(eye, m)
        np.testing.assert_allclose(out.numpy(), [[1, 2], [3, 4]])

    def test_hand_product(self):
        # hand multiplication: [[1,2],[3,4]] @ [[5,6],[7,8]]
        a = Tensor([[1.0, 2.0], [3.0, 4.0]])
        b = Tensor([[5.0, 6.0], [7.0, 8.0]])
        np.testing.assert_allclose(ops.matmul(a, b).numpy(), [[19, 22], [43, 50]])

    def test_shape_mismatch_names_both_shapes(self):
        a = Tensor(np.zeros((2, 3)))
        b = Tensor(np.zeros((4, 5)))
        with pytest.raises(ShapeError) as exc:
            ops.matmul(a, b)
        assert "(2, 3)" in str(exc.value) and "(4, 5)" in str(exc.value)

    def test_batched_broadcast(self):
        a = Tensor(np.ones((5, 2, 3)))
        b = Tensor(np.ones((3, 4)))
        assert ops.matmul(a, b).shape == (5, 2, 4)


class TestSoftmax:
    def test_uniform_on_equal_inputs(self):
        out = ops.softmax(Tensor([0.0, 0.0, 0.0]), axis=0)
        np.testing.assert_allclose(out.numpy(), [1 / 3] * 3, atol=1e-12)

    def test_no_overflow_on_large_inputs(self):
        out = ops.softmax(Tensor([1000.0, 1000.0]), axis=0)
        np.testing.assert_allclose(out.numpy(), [0.5, 0.5])
        assert np.all(np.isfinite(out.numpy()))

    def test_closed_form_quarter_three_quarters(self):
        # softmax([0, ln 3]) = [1, 3] / 4
        out = ops.softmax(Tensor([0.0, np.log(3.0)]), axis=0)
        np.testing.assert_allclose(out.numpy(), [0.25, 0.75], atol=1e-12)

    def test_rows_sum_to_one_and_shift_invariance(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(6, 9))
        y = ops.softmax(Tensor(x), axis=1).numpy()
        np.testing.assert_allclose(y.sum(axis=1), np.ones(6), atol=1e-6)
        y_shifted = ops.softmax(Tensor(x + 17.3), axis=1).numpy()
        np.testing.assert_allclose(y, y_shifted, atol=1e-6)

    def test_invalid_axis(self):
        with pytest.raises(ShapeError):
            ops.softmax(Tensor([1.0, 2.0]), axis=3)


class TestLayerNorm:
    def test_zero_variance_row_maps_to_zero(self):
        out = ops.layer_norm(Tensor([1.0, 1.0, 1.0]), Tensor(np.ones(3)), Tensor(np.zeros(3)))
        np.testing.assert_allclose(out.numpy(), np.zeros(3), atol=1e-3)

    def test_unit_variance_fixed_point(self):
        # [-1, 1] already has mean 0, population variance 1
        out = ops.layer_norm(
            Tensor([-1.0, 1.0]), Tensor(np.ones(2)), Tensor(np.zeros(2)), eps=1e-12
        )
        np.testing.assert_allclose(out.numpy(), [-1.0, 1.0], atol=1e-6)

    def test_zero_gain_collapses_to_bias(self):
        out = ops.layer_norm(Tensor([2.0, 4.0]), Tensor(np.zeros(2)), Tensor(np.full(2, 5.0)))
        np.testing.assert_allclose(out.numpy(), [5.0, 5.0])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            ops.layer_norm(Tensor([1.0, 2.0]), Tensor(np.ones(3)), Tensor(np.zeros(3)))


class TestElementwise:
    def test_add(self):
        np.testing.assert_allclose(
            ops.elementwise("add", Tensor([1.0, 2.0]), Tensor([3.0, 4.0])).numpy(), [4, 6]
        )

    def test_relu(self):
        np.testing.assert_allclose(
            ops.elementwise("relu", Tensor([-1.0, 0.0, 2.0])).numpy(), [0, 0, 2]
        )

    def test_sigmoid_at_zero(self):
        assert ops.elementwise("sigmoid", Tensor([0.0])).numpy()[0] == pytest.approx(0.5)

    def test_broadcast_incompatible(self):
        with pytest.raises(ShapeError):
            ops.add(Tensor(np.zeros(3)), Tensor(np.zeros(4)))

    def test_log_domain_error_in_test_mode(self):
        with pytest.raises(DomainError):
            ops.log(Tensor([0.0, 1.0]))

    def test_log_allowed_in_run_mode(self):
        with precision("f32"):
            out = ops.log(Tensor([0.0, 1.0]))
        assert np.isneginf(out.numpy()[0])

    def test_unknown_op_rejected(self):
        with pytest.raises(ValueError):
            ops.elementwise("mystery", Tensor([1.0]))


class TestReduce:
    def test_sum(self):
        assert ops.reduce("sum", Tensor([1.0, 2.0, 3.0])).item() == 6.0

    def test_mean_axis(self):
        # hand computation: rows [1,3] and [5,7]
        out = ops.reduce("mean", Tensor([[1.0, 3.0], [5.0, 7.0]]), axis=1)
        np.testing.assert_allclose(out.numpy(), [2.0, 6.0])

    def test_max_tie_breaks_to_first_index(self):
        from facemtl.autodiff import Tape, backward

        x = Tensor([2.0, 2.0, 1.0], requires_grad=True)
        with Tape():
            m = ops.max(x)
        backward(m)
        np.testing.assert_allclose(x.grad, [1.0, 0.0, 0.0])

    def test_invalid_axis(self):
        with pytest.raises(ShapeError):
            ops.sum(Tensor([1.0]), axis=2)


class TestConv2d:
    def test_pointwise_scaling(self):
        x = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2))
        w = Tensor(np.array([[2.0]]).reshape(1, 1, 1, 1))
        out = ops.conv2d(x, w)
        np.testing.assert_allclose(out.numpy().reshape(2, 2), [[2, 4], [6, 8]])

    def test_hand_convolution(self):
        # all-ones 2x2 kernel over [[1,2],[3,4]] -> 1+2+3+4
        x = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2))
        w = Tensor(np.ones((1, 1, 2, 2)))
        out = ops.conv2d(x, w)
        assert out.shape == (1, 1, 1, 1)
        assert out.item() == pytest.approx(10.0)

    def test_stride_two_output_shape(self):
        x = Tensor(np.zeros((1, 1, 4, 4)))
        w = Tensor(np.zeros((1, 1, 2, 2)))
        assert ops.conv2d(x, w, stride=2).shape == (1, 1, 2, 2)

    def test_kernel_larger_than_input(self):
        x = Tensor(np.zeros((1, 1, 2, 2)))
        w = Tensor(np.zeros((1, 1, 3, 3)))
        with pytest.raises(ShapeError):
            ops.conv2d(x, w)


class TestBilinearResize:
    def test_same_size_is_exact_identity(self):
        x = np.random.default_rng(1).normal(size=(1, 2, 2, 2))
        out = ops.bilinear_resize(Tensor(x), 2, 2)
        assert np.array_equal(out.numpy(), x)

    def test_constant_stays_constant(self):
        x = Tensor(np.full((1, 1, 3, 5), 7.25))
        for oh, ow in [(1, 1), (6, 10), (4, 3)]:
            out = ops.bilinear_resize(x, oh, ow)
            np.testing.assert_allclose(out.numpy(), 7.25, atol=1e-12)

    def test_hand_weights_1x2_to_1x4(self):
        # align_corners=False: src = (j+0.5)/2 - 0.5 -> [0, .5, 1.5, 2]/...
        x = Tensor(np.array([[0.0, 2.0]]).reshape(1, 1, 1, 2))
        out = ops.bilinear_resize(x, 1, 4)
        np.testing.assert_allclose(out.numpy().reshape(-1), [0.0, 0.5, 1.5, 2.0])

    def test_bad_output_dims(self):
        with pytest.raises(ValueError):
            ops.bilinear_resize(Tensor(np.zeros((1, 1, 2, 2))), 0, 4)


class TestShapeOps:
    def test_concat_and_slice_roundtrip(self):
        a = Tensor(np.arange(6.0).reshape(2, 3))
        b = Tensor(np.arange(6.0, 12.0).reshape(2, 3))
        cat = ops.concat([a, b], axis=0)
        back = ops.slice_axis(cat, 0, 2, 4)
        np.testing.assert_allclose(back.numpy(), b.numpy())

    def test_gather_rows(self):
        x = Tensor(np.arange(12.0).reshape(4, 3))
        out = ops.gather_rows(x, [2, 0])
        np.testing.assert_allclose(out.numpy(), [[6, 7, 8], [0, 1, 2]])

    def test_linear_hand_case(self):
        # x @ W^T + b with x=[1,1], W=[[1,2],[3,4]], b=[10,20]
        out = ops.linear(Tensor([[1.0, 1.0]]), Tensor([[1.0, 2.0], [3.0, 4.0]]),
                         Tensor([10.0, 20.0]))
        np.testing.assert_allclose(out.numpy(), [[13.0, 27.0]])
