import numpy as np
import pytest

from radiocnn.core import StreamPurpose, stream_for
from radiocnn.nn import Conv2D, Dense, LayerMode
from radiocnn.nn.gradcheck import (
    LAYER_CHECKS,
    LOSS_CHECKS,
    GradientCheckError,
    gradcheck_layer,
    gradcheck_loss_head,
    gradcheck_model,
    relative_error,
    run_gradchecks,
)


@pytest.mark.parametrize("name", LAYER_CHECKS + LOSS_CHECKS)
def test_every_check_passes(name):
    (result,) = run_gradchecks([name])
    assert result.name == name
    assert result.passed, f"{name}: {result.error:.3e}"


@pytest.mark.parametrize(
    "name,bound",
    [("dense", 1e-9), ("conv2d", 1e-6), ("batchnorm", 1e-5), ("global_avg_pool", 1e-8), ("relu", 1e-6)],
)
def test_tight_bounds(name, bound):
    (result,) = run_gradchecks([name], seed=1)
    assert result.error <= bound


@pytest.mark.parametrize("head", LOSS_CHECKS)
def test_fused_loss_heads(head):
    assert gradcheck_loss_head(head, seed=2) <= 1e-6


def test_end_to_end_mini_ccnn():
    assert gradcheck_model(seed=0) <= 1e-4


def test_e2e_flag_appends_model_check():
    results = run_gradchecks([], e2e=True)
    assert [r.name for r in results] == ["e2e"]
    assert results[0].passed


def test_unknown_check_name():
    with pytest.raises(KeyError, match="nope"):
        run_gradchecks(["nope"])


def test_float32_parameters_are_rejected():
    layer = Conv2D(1, 1, stream_for(0, StreamPurpose.INIT, 1), dtype=np.float32)
    with pytest.raises(GradientCheckError, match="float64"):
        gradcheck_layer(layer, (1, 4, 4, 1))


def test_buffers_restored_after_batchnorm_check():
    from radiocnn.nn import BatchNorm

    layer = BatchNorm(2, dtype=np.float64)
    gradcheck_layer(layer, (4, 3, 3, 2), LayerMode.TRAINING)
    np.testing.assert_array_equal(layer.running_mean, np.zeros(2))
    np.testing.assert_array_equal(layer.running_var, np.ones(2))


def test_relative_error_definition():
    assert relative_error(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0
    assert relative_error(np.array([1.0]), np.array([3.0])) == pytest.approx(0.5)
    assert relative_error(np.zeros(3), np.zeros(3)) == 0.0
    with pytest.raises(GradientCheckError):
        relative_error(np.array([np.nan]), np.array([0.0]))


def test_linear_layer_is_effectively_exact():
    layer = Dense(3, 2, stream_for(0, StreamPurpose.INIT, 1), dtype=np.float64)
    assert gradcheck_layer(layer, (4, 3), LayerMode.INFERENCE) <= 1e-9
