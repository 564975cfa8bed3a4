import math

import numpy as np
import pytest

from radiocnn.data import RecordSource, scan_dataset_dir, split_train_val
from radiocnn.metrics import format_history_csv
from radiocnn.models import build_model
from radiocnn.nn import LayerMode, Parameter
from radiocnn.schemas import ArchitectureSpec, PipelineConfig, TrainConfig
from radiocnn.train import (
    Adam,
    EarlyStopState,
    LossError,
    NonFiniteGradientError,
    StopDecision,
    TrainingAbortedError,
    TrainingError,
    adam_step,
    binary_ce_loss,
    early_stop_update,
    evaluate,
    fit,
    head_loss,
    l2_penalty,
    lr_at_epoch,
    predict_labels,
    restore_best,
    sparse_ce_loss,
)

from conftest import make_records


class TestLosses:
    def test_uniform_softmax_is_log_k(self):
        loss, _ = sparse_ce_loss(np.full((4, 3), 1 / 3), [0, 1, 2, 0])
        assert loss == pytest.approx(math.log(3), rel=1e-12)

    def test_sparse_gradient(self):
        probs = np.array([[0.7, 0.2, 0.1], [0.1, 0.1, 0.8]])
        _, grad = sparse_ce_loss(probs, [0, 2])
        np.testing.assert_allclose(grad, [[-0.15, 0.1, 0.05], [0.05, 0.05, -0.1]], atol=1e-12)

    def test_binary_half_is_log_two(self):
        loss, grad = binary_ce_loss(np.full((2, 1), 0.5), [0, 1])
        assert loss == pytest.approx(math.log(2), rel=1e-12)
        np.testing.assert_allclose(grad, [[0.25], [-0.25]])

    def test_saturated_prediction_stays_finite(self):
        loss, _ = sparse_ce_loss(np.array([[1.0, 0.0, 0.0]]), [1])
        assert loss == pytest.approx(-math.log(1e-7))
        loss, _ = binary_ce_loss(np.array([[1.0]]), [0])
        assert math.isfinite(loss)

    def test_head_dispatch(self):
        assert head_loss(np.full((2, 1), 0.5), [0, 1])[0] == pytest.approx(math.log(2))
        assert head_loss(np.full((2, 3), 1 / 3), [0, 1])[0] == pytest.approx(math.log(3))

    @pytest.mark.parametrize(
        "probs,labels",
        [
            (np.full((2, 3), 1 / 3), [0, 3]),
            (np.full((2, 3), 1 / 3), [0]),
            (np.full((2, 1), 0.5), [0, 2]),
        ],
    )
    def test_bad_labels(self, probs, labels):
        with pytest.raises(LossError):
            head_loss(probs, labels)

    def test_predict_labels(self):
        np.testing.assert_array_equal(predict_labels(np.array([[0.2, 0.5, 0.3]])), [1])
        np.testing.assert_array_equal(predict_labels(np.array([[0.2], [0.7], [0.5]])), [0, 1, 0])


class TestOptimizer:
    def test_l2_penalty_and_gradient(self):
        w = Parameter("w", np.array([1.0, 2.0]), l2_coeff=0.5)
        b = Parameter("b", np.array([3.0]))
        assert l2_penalty([w, b]) == pytest.approx(2.5)
        np.testing.assert_allclose(w.grad, [1.0, 2.0])
        assert b.grad[0] == 0.0

    def test_l2_penalty_without_gradient(self):
        w = Parameter("w", np.array([1.0, 2.0]), l2_coeff=0.5)
        l2_penalty([w], accumulate_grad=False)
        assert not w.grad.any()

    def test_step_index_is_one_based(self):
        with pytest.raises(ValueError):
            adam_step([Parameter("w", np.ones(2))], 0.1, 0)

    def test_non_finite_gradient_leaves_parameters_untouched(self):
        ok = Parameter("ok", np.ones(2))
        bad = Parameter("bad", np.ones(2))
        ok.grad[:] = 1.0
        bad.grad[0] = np.nan
        with pytest.raises(NonFiniteGradientError, match="bad"):
            adam_step([ok, bad], 0.1, 1)
        np.testing.assert_array_equal(ok.value, np.ones(2))
        assert not ok.adam_m.any()

    def test_first_step_moves_by_lr(self):
        w = Parameter("w", np.array([1.0, -1.0]))
        w.grad[:] = [4.0, -0.01]
        adam_step([w], 0.1, 1)
        np.testing.assert_allclose(w.value, [0.9, -0.9], rtol=1e-5)
        assert not w.grad.any()

    def test_minimizes_quadratic(self):
        w = Parameter("w", np.array([5.0]))
        adam = Adam([w])
        for _ in range(100):
            w.grad[:] = 2 * w.value
            adam.step(0.1)
        assert adam.t == 100
        assert abs(w.value[0]) < 0.5

    def test_schedule(self):
        cfg = TrainConfig()
        assert lr_at_epoch(cfg, 1) == 1e-3
        assert lr_at_epoch(cfg, 10) == 1e-3
        assert lr_at_epoch(cfg, 11) == 5e-4
        assert lr_at_epoch(cfg, 21) == 2.5e-4
        with pytest.raises(ValueError):
            lr_at_epoch(cfg, 0)


class TestEarlyStopping:
    @pytest.fixture
    def model(self, mini_spec):
        return build_model(mini_spec, seed=0)

    def test_patience_trace(self, model):
        state = EarlyStopState(patience=5)
        losses = [1.0, 0.9, 0.95, 0.96, 0.97, 0.98, 0.99]
        decisions = []
        for epoch, loss in enumerate(losses, start=1):
            decisions.append(early_stop_update(state, epoch, loss, model))
            if epoch == 2:
                kept = model.parameters()[0].value.copy()
                model.parameters()[0].value += 1.0
        assert decisions[:-1] == [StopDecision.CONTINUE] * 6
        assert decisions[-1] is StopDecision.STOP
        assert state.best_epoch == 2 and state.best_loss == 0.9
        assert restore_best(state, model)
        np.testing.assert_array_equal(model.parameters()[0].value, kept)

    def test_equal_loss_is_not_an_improvement(self, model):
        state = EarlyStopState(patience=1)
        assert early_stop_update(state, 1, 1.0, model) is StopDecision.CONTINUE
        assert early_stop_update(state, 2, 1.0, model) is StopDecision.STOP
        assert state.best_epoch == 1

    def test_min_delta(self, model):
        state = EarlyStopState(patience=3, min_delta=0.1)
        early_stop_update(state, 1, 1.0, model)
        early_stop_update(state, 2, 0.95, model)
        assert state.best_epoch == 1 and state.wait == 1

    def test_non_finite_loss_stops_with_error(self, model):
        state = EarlyStopState(patience=5)
        assert early_stop_update(state, 1, math.nan, model) is StopDecision.STOP
        assert state.error
        assert not restore_best(state, model)


@pytest.fixture
def sources(pipeline_8px):
    records = make_records(24)
    train = RecordSource(records[:18], pipeline_8px, LayerMode.TRAINING)
    val = RecordSource(records[18:], pipeline_8px)
    return train, val


def short_config(**kwargs) -> TrainConfig:
    return TrainConfig(**{"max_epochs": 2, "batch_size": 4, "seed": 0, **kwargs})


class TestFit:
    def test_zero_learning_rate_keeps_weights(self, mini_spec, sources):
        model = build_model(mini_spec, seed=0)
        before = [p.value.copy() for p in model.parameters()]
        fit(model, *sources, short_config(max_epochs=1, base_lr=0.0))
        for value, param in zip(before, model.parameters()):
            np.testing.assert_array_equal(value, param.value)

    def test_history_is_deterministic(self, mini_spec, sources):
        runs = []
        for _ in range(2):
            model = build_model(mini_spec, seed=0)
            runs.append(format_history_csv(fit(model, *sources, short_config())))
        assert runs[0] == runs[1]
        assert runs[0].count("\n") == 3

    def test_restored_weights_reproduce_best_val_loss(self, mini_spec, sources):
        model = build_model(mini_spec, seed=1)
        history = fit(model, *sources, short_config(max_epochs=3, base_lr=1e-2))
        best = history.best_row()
        assert history.best_epoch == best.epoch
        assert evaluate(model, sources[1]).loss == pytest.approx(best.val_loss, abs=1e-9)

    def test_history_rows(self, mini_spec, sources):
        model = build_model(mini_spec, seed=0)
        seen = []
        history = fit(model, *sources, short_config(), on_epoch=lambda row, state: seen.append(row.epoch))
        assert seen == [1, 2]
        assert [row.epoch for row in history.rows] == [1, 2]
        assert all(0.0 <= row.train_acc <= 1.0 for row in history.rows)
        assert history.optimizer_step >= 5

    def test_empty_training_source(self, mini_spec, pipeline_8px, sources):
        model = build_model(mini_spec)
        with pytest.raises(TrainingError, match="empty"):
            fit(model, RecordSource([], pipeline_8px), sources[1], short_config())

    def test_nan_weights_abort_with_location(self, mini_spec, sources):
        model = build_model(mini_spec)
        model.parameters()[0].value[...] = np.nan
        with pytest.raises(TrainingAbortedError, match="epoch 1, batch 0") as info:
            fit(model, *sources, short_config())
        assert info.value.epoch == 1 and info.value.batch == 0

    def test_batchnorm_statistics_match_final_weights(self, mini_spec, sources):
        model = build_model(mini_spec, seed=0)
        fit(model, *sources, short_config(max_epochs=1, base_lr=1e-2))
        fitted = [b.copy() for _, b in model.buffers()]
        model.recalibrate_batchnorm(batch.inputs for batch in sources[0].batches(1))
        for (name, again), saved in zip(model.buffers(), fitted):
            np.testing.assert_allclose(again, saved, rtol=1e-6, err_msg=name)

    def test_batchnorm_recalibration_can_be_disabled(self, mini_spec, sources):
        runs = []
        for recalibrate in (True, False):
            model = build_model(mini_spec, seed=0)
            fit(model, *sources, short_config(max_epochs=1, recalibrate_batchnorm=recalibrate))
            runs.append(np.concatenate([b for _, b in model.buffers()]))
        assert not np.allclose(runs[0], runs[1])
        # after five momentum-0.99 steps the running variance is still mostly its initial 1.0
        assert runs[1][-4:].min() > 0.85

    def test_early_stopping_ends_run(self, sources):
        # no BatchNorm: with lr 0 the validation loss is then identical every epoch
        spec = ArchitectureSpec(arch="cnn", input_shape=(8, 8, 1), filters=(2,), dense_width=4)
        model = build_model(spec, seed=0)
        history = fit(model, *sources, short_config(max_epochs=20, base_lr=0.0, patience=2))
        assert history.stopped_early
        assert len(history) == 3
        assert history.best_epoch == 1


class TestEvaluate:
    def test_random_labels_give_chance_accuracy(self, pipeline_8px):
        spec = ArchitectureSpec(arch="ccnn", input_shape=(8, 8, 1), filters=(4, 8), dense_width=8)
        model = build_model(spec, seed=0)
        result = evaluate(model, RecordSource(make_records(1000, seed=7), pipeline_8px))
        assert result.samples == 1000
        assert abs(result.accuracy - 1 / 3) <= 0.05
        assert result.confusion.counts.sum(axis=1).tolist() == [334, 333, 333]

    def test_empty_source(self, mini_spec, pipeline_8px):
        with pytest.raises(TrainingError):
            evaluate(build_model(mini_spec), _EmptySource())


class _EmptySource:
    def batches(self, epoch: int = 1):
        return iter(())

    def __len__(self) -> int:
        return 0


@pytest.mark.slow
def test_learns_synthetic_patterns(tmp_path):
    from radiocnn.data import gen_synthetic

    gen_synthetic(tmp_path, per_class=100, size=32, seed=0)
    records = scan_dataset_dir(tmp_path).records("train")
    pipeline = PipelineConfig(image_size=(32, 32), channels=1, batch_size=32, prefetch_depth=0)
    train_records, val_records = split_train_val(records, 0.2, seed=0)
    assert len(val_records) == 60
    # default dense width, dropout and L2
    spec = ArchitectureSpec(arch="ccnn", input_shape=(32, 32, 1), filters=(8, 16, 32, 64))
    model = build_model(spec, seed=0)
    history = fit(
        model,
        RecordSource(train_records, pipeline, LayerMode.TRAINING),
        RecordSource(val_records, pipeline),
        TrainConfig(max_epochs=30, batch_size=32, base_lr=1e-3, seed=0),
    )
    assert len(history) <= 30
    assert max(row.train_acc for row in history.rows) >= 0.99
    assert history.best_row().val_acc >= 0.90
