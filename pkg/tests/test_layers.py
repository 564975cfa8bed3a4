import numpy as np
import pytest

from radiocnn.core import RngStream, StreamPurpose, stream_for
from radiocnn.nn import (
    BatchNorm,
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    GlobalAvgPool,
    LayerContext,
    LayerError,
    LayerMode,
    MaxPool2D,
    ReLU,
    Sigmoid,
    Softmax,
)

TRAIN = LayerMode.TRAINING
INFER = LayerMode.INFERENCE


def direct_conv(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    n, h, w, _ = x.shape
    cout = kernel.shape[3]
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    y = np.zeros((n, h, w, cout))
    for b in range(n):
        for i in range(h):
            for j in range(w):
                for o in range(cout):
                    y[b, i, j, o] = np.sum(padded[b, i : i + 3, j : j + 3, :] * kernel[:, :, :, o]) + bias[o]
    return y


def conv(cin: int, cout: int, dtype=np.float64, seed: int = 0) -> Conv2D:
    return Conv2D(cin, cout, stream_for(seed, StreamPurpose.INIT, 1), dtype=dtype)


class TestConv2D:
    def test_centre_delta_kernel_is_identity(self):
        layer = conv(1, 1)
        layer.kernel.value[...] = 0.0
        layer.kernel.value[1, 1, 0, 0] = 1.0
        x = np.random.default_rng(0).standard_normal((2, 5, 4, 1))
        y, _ = layer.forward(x, INFER)
        np.testing.assert_array_equal(y, x)

    def test_all_ones_kernel_on_constant_interior(self):
        layer = conv(1, 1)
        layer.kernel.value[...] = 1.0
        layer.bias.value[...] = 0.5
        y, _ = layer.forward(np.full((1, 5, 5, 1), 2.0), INFER)
        assert y[0, 2, 2, 0] == pytest.approx(9 * 2.0 + 0.5)
        assert y[0, 0, 0, 0] == pytest.approx(4 * 2.0 + 0.5)

    def test_matches_direct_loop_on_random_instances(self):
        rng = np.random.default_rng(10)
        for instance in range(20):
            h, w = rng.integers(1, 9, 2)
            cin, cout = rng.integers(1, 4), rng.integers(1, 5)
            layer = conv(int(cin), int(cout), seed=instance)
            layer.bias.value[...] = rng.standard_normal(cout)
            x = rng.standard_normal((1, h, w, cin))
            y, _ = layer.forward(x, INFER)
            expected = direct_conv(x, layer.kernel.value, layer.bias.value)
            np.testing.assert_allclose(y, expected, atol=1e-6, rtol=0)

    def test_float32_matches_direct_loop(self):
        layer = conv(3, 4, dtype=np.float32)
        x = np.random.default_rng(3).standard_normal((1, 8, 8, 3)).astype(np.float32)
        y, _ = layer.forward(x, INFER)
        expected = direct_conv(x.astype(np.float64), layer.kernel.value.astype(np.float64), layer.bias.value)
        np.testing.assert_allclose(y, expected, atol=1e-5, rtol=0)

    @pytest.mark.parametrize("h,w", [(1, 1), (1, 7), (6, 3), (9, 9)])
    def test_same_padding_keeps_spatial_shape(self, h, w):
        y, _ = conv(2, 3).forward(np.ones((2, h, w, 2)), INFER)
        assert y.shape == (2, h, w, 3)

    def test_channel_mismatch(self):
        with pytest.raises(LayerError, match="input channels"):
            conv(2, 3).forward(np.ones((1, 4, 4, 3)), INFER)

    def test_glorot_limit(self):
        layer = conv(3, 4)
        limit = np.sqrt(6.0 / (9 * 3 + 9 * 4))
        assert np.abs(layer.kernel.value).max() <= limit
        np.testing.assert_array_equal(layer.bias.value, np.zeros(4))


class TestBatchNorm:
    def test_zero_gamma_returns_beta(self):
        layer = BatchNorm(2, dtype=np.float64)
        layer.gamma.value[...] = 0.0
        layer.beta.value[...] = [0.25, -1.0]
        y, _ = layer.forward(np.random.default_rng(0).standard_normal((3, 2, 2, 2)), TRAIN)
        np.testing.assert_array_equal(y[..., 0], np.full((3, 2, 2), 0.25))
        np.testing.assert_array_equal(y[..., 1], np.full((3, 2, 2), -1.0))

    def test_normalized_statistics(self):
        layer = BatchNorm(2, dtype=np.float64)
        x = 3.0 * np.random.default_rng(1).standard_normal((4, 4, 4, 2)) + 5.0
        y, _ = layer.forward(x, TRAIN)
        assert np.abs(y.mean(axis=(0, 1, 2))).max() < 1e-5
        assert np.abs(y.var(axis=(0, 1, 2)) - 1.0).max() < 1e-3

    def test_standardized_batch_is_a_fixed_point(self):
        layer = BatchNorm(1, dtype=np.float64)
        x = np.array([-1.0, 1.0, -1.0, 1.0]).reshape(4, 1, 1, 1)
        y, _ = layer.forward(x, TRAIN)
        np.testing.assert_allclose(y, x / np.sqrt(1.0 + layer.epsilon))
        np.testing.assert_allclose(y, x, atol=1e-3)

    def test_running_statistics_update(self):
        layer = BatchNorm(1, dtype=np.float64)
        x = np.array([1.0, 3.0]).reshape(2, 1, 1, 1)
        layer.forward(x, TRAIN)
        assert layer.running_mean[0] == pytest.approx(0.01 * 2.0)
        assert layer.running_var[0] == pytest.approx(0.99 * 1.0 + 0.01 * 1.0)

    def test_inference_uses_running_stats_without_updating(self):
        layer = BatchNorm(2, dtype=np.float64)
        layer.running_mean[...] = [1.0, -1.0]
        layer.running_var[...] = [4.0, 0.25]
        x = np.random.default_rng(2).standard_normal((2, 3, 3, 2))
        first, _ = layer.forward(x, INFER)
        second, _ = layer.forward(x, INFER)
        np.testing.assert_array_equal(first, second)
        np.testing.assert_array_equal(layer.running_mean, [1.0, -1.0])
        expected = (x - layer.running_mean) / np.sqrt(layer.running_var + layer.epsilon)
        np.testing.assert_allclose(first, expected)

    def test_single_value_per_channel_rejected_in_training(self):
        with pytest.raises(LayerError, match="at least 2"):
            BatchNorm(2).forward(np.ones((1, 1, 1, 2), np.float32), TRAIN)

    def test_single_value_allowed_in_inference(self):
        y, _ = BatchNorm(2).forward(np.ones((1, 1, 1, 2), np.float32), INFER)
        assert np.isfinite(y).all()

    def test_calibration_installs_weighted_batch_statistics(self):
        layer = BatchNorm(1, dtype=np.float64)
        small = np.array([1.0, 3.0]).reshape(2, 1, 1, 1)
        large = np.array([10.0, 10.0, 12.0, 12.0]).reshape(4, 1, 1, 1)
        layer.start_calibration()
        y, _ = layer.forward(small, INFER)
        layer.forward(large, INFER)
        # batch statistics normalize while calibrating
        np.testing.assert_allclose(y.ravel(), np.array([-1.0, 1.0]) / np.sqrt(1.0 + layer.epsilon))
        np.testing.assert_array_equal(layer.running_mean, [0.0])
        assert layer.finish_calibration()
        assert layer.running_mean[0] == pytest.approx((2 * 2.0 + 4 * 11.0) / 6)
        assert layer.running_var[0] == pytest.approx((2 * 1.0 + 4 * 1.0) / 6)
        assert not layer.calibrating

    def test_calibration_without_batches_keeps_estimates(self):
        layer = BatchNorm(2)
        layer.start_calibration()
        assert not layer.finish_calibration()
        np.testing.assert_array_equal(layer.running_mean, [0.0, 0.0])
        np.testing.assert_array_equal(layer.running_var, [1.0, 1.0])

    def test_finish_without_start(self):
        with pytest.raises(LayerError, match="start_calibration"):
            BatchNorm(2).finish_calibration()


class TestReLU:
    def test_definition(self):
        y, ctx = ReLU().forward(np.array([-1.0, 0.0, 2.0]), TRAIN)
        np.testing.assert_array_equal(y, [0.0, 0.0, 2.0])
        np.testing.assert_array_equal(ReLU().backward(ctx, np.ones(3)), [0.0, 0.0, 1.0])

    def test_identity_on_nonnegatives(self):
        x = np.abs(np.random.default_rng(0).standard_normal((2, 3)))
        np.testing.assert_array_equal(ReLU().forward(x, INFER)[0], x)


class TestMaxPool2D:
    def test_window_maximum(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 2, 2, 1)
        assert MaxPool2D().forward(x, INFER)[0].item() == 4.0

    def test_constant_input_routes_gradient_to_first_element(self):
        layer = MaxPool2D()
        y, ctx = layer.forward(np.full((1, 2, 2, 1), 3.0), TRAIN)
        assert y.item() == 3.0
        dx = layer.backward(ctx, np.ones((1, 1, 1, 1)))
        np.testing.assert_array_equal(dx[0, :, :, 0], [[1.0, 0.0], [0.0, 0.0]])

    def test_odd_trailing_row_and_column_dropped(self):
        layer = MaxPool2D()
        x = np.arange(25, dtype=np.float64).reshape(1, 5, 5, 1)
        y, ctx = layer.forward(x, TRAIN)
        np.testing.assert_array_equal(y[0, :, :, 0], [[6.0, 8.0], [16.0, 18.0]])
        dx = layer.backward(ctx, np.ones_like(y))
        assert dx.shape == x.shape
        assert dx[0, 4, :, 0].sum() == 0 and dx[0, :, 4, 0].sum() == 0

    def test_spatial_chain(self):
        shape = (180, 180, 3)
        chain = []
        for _ in range(4):
            shape = MaxPool2D().output_shape(shape)
            chain.append(shape[0])
        assert chain == [90, 45, 22, 11]

    def test_too_small(self):
        with pytest.raises(LayerError, match="too small"):
            MaxPool2D().forward(np.ones((1, 1, 4, 1)), INFER)


class TestDropout:
    def test_rate_zero_is_identity(self):
        x = np.random.default_rng(0).standard_normal((4, 4))
        for mode in LayerMode:
            np.testing.assert_array_equal(Dropout(0.0).forward(x, mode, RngStream(0))[0], x)

    def test_inference_is_identity(self):
        x = np.random.default_rng(0).standard_normal((4, 4))
        np.testing.assert_array_equal(Dropout(0.7).forward(x, INFER)[0], x)

    def test_preserves_expectation(self):
        y, _ = Dropout(0.3).forward(np.ones(10**5, np.float32), TRAIN, RngStream(0, 5))
        assert abs(y.mean() - 1.0) < 0.02
        np.testing.assert_allclose(y[y != 0], 1 / 0.7, rtol=1e-6)

    def test_backward_reuses_mask(self):
        layer = Dropout(0.5)
        y, ctx = layer.forward(np.ones((8, 8)), TRAIN, RngStream(0, 6))
        np.testing.assert_array_equal(layer.backward(ctx, np.ones((8, 8))), y)

    @pytest.mark.parametrize("rate", [-0.1, 1.0])
    def test_invalid_rate(self, rate):
        with pytest.raises(LayerError):
            Dropout(rate)

    def test_training_needs_stream(self):
        with pytest.raises(LayerError, match="random stream"):
            Dropout(0.5).forward(np.ones(4), TRAIN)


class TestPoolingAndReshape:
    def test_global_avg_pool(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 2, 2, 1)
        layer = GlobalAvgPool()
        y, ctx = layer.forward(x, TRAIN)
        np.testing.assert_array_equal(y, [[2.5]])
        np.testing.assert_array_equal(layer.backward(ctx, np.array([[4.0]]))[0, :, :, 0], np.ones((2, 2)))

    def test_global_avg_pool_constant(self):
        y, _ = GlobalAvgPool().forward(np.full((2, 3, 3, 4), 1.5), INFER)
        np.testing.assert_array_equal(y, np.full((2, 4), 1.5))

    def test_flatten_row_major(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 2, 2, 1)
        layer = Flatten()
        y, ctx = layer.forward(x, TRAIN)
        np.testing.assert_array_equal(y, [[1.0, 2.0, 3.0, 4.0]])
        np.testing.assert_array_equal(layer.backward(ctx, y), x)

    def test_flatten_of_flat_input(self):
        x = np.arange(6.0).reshape(2, 3)
        np.testing.assert_array_equal(Flatten().forward(x, INFER)[0], x)


class TestDense:
    def test_identity_weights(self):
        layer = Dense(3, 3, RngStream(0), dtype=np.float64)
        layer.weight.value[...] = np.eye(3)
        x = np.random.default_rng(0).standard_normal((2, 3))
        np.testing.assert_array_equal(layer.forward(x, INFER)[0], x)

    def test_affine_definition(self):
        layer = Dense(2, 1, RngStream(0), dtype=np.float64)
        layer.weight.value[...] = [[1.0], [1.0]]
        layer.bias.value[...] = [3.0]
        np.testing.assert_array_equal(layer.forward(np.array([[1.0, 2.0]]), INFER)[0], [[6.0]])

    def test_backward_formulas(self):
        layer = Dense(3, 2, RngStream(0), dtype=np.float64)
        x = np.random.default_rng(1).standard_normal((4, 3))
        dy = np.random.default_rng(2).standard_normal((4, 2))
        _, ctx = layer.forward(x, TRAIN)
        dx = layer.backward(ctx, dy)
        np.testing.assert_allclose(layer.weight.grad, x.T @ dy)
        np.testing.assert_allclose(layer.bias.grad, dy.sum(axis=0))
        np.testing.assert_allclose(dx, dy @ layer.weight.value.T)

    def test_feature_mismatch(self):
        with pytest.raises(LayerError):
            Dense(3, 2, RngStream(0)).forward(np.ones((1, 4), np.float32), INFER)


class TestOutputs:
    def test_softmax_symmetry(self):
        np.testing.assert_allclose(Softmax().forward(np.zeros((1, 3)), INFER)[0], [[1 / 3] * 3])

    def test_softmax_is_stable(self):
        probs, _ = Softmax().forward(np.array([[1000.0, 0.0, 0.0]]), INFER)
        assert np.isfinite(probs).all()
        np.testing.assert_allclose(probs, [[1.0, 0.0, 0.0]], atol=1e-12)

    def test_softmax_rows_normalized(self):
        z = 10.0 * np.random.default_rng(0).standard_normal((16, 5)).astype(np.float32)
        probs, _ = Softmax().forward(z, INFER)
        np.testing.assert_allclose(probs.sum(axis=1), np.ones(16), atol=1e-6)
        assert probs.min() >= 0.0 and probs.max() <= 1.0

    def test_sigmoid(self):
        probs, _ = Sigmoid().forward(np.array([[0.0], [800.0], [-800.0]]), INFER)
        assert probs[0, 0] == 0.5
        assert np.isfinite(probs).all()
        assert probs[1, 0] == pytest.approx(1.0) and probs[2, 0] == pytest.approx(0.0)


def test_context_is_single_use():
    layer = ReLU()
    _, ctx = layer.forward(np.ones(3), TRAIN)
    layer.backward(ctx, np.ones(3))
    with pytest.raises(LayerError, match="more than once"):
        layer.backward(ctx, np.ones(3))


def test_context_consume_flags():
    ctx = LayerContext(TRAIN, {"a": 1})
    assert ctx.consume() == {"a": 1}
    assert ctx.consumed
