import json
import struct

import numpy as np
import pytest

from radiocnn import settings
from radiocnn.core import StreamPurpose, stream_for
from radiocnn.models import (
    CheckpointHeaderError,
    CheckpointMagicError,
    CheckpointShapeError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    build_model,
    load_checkpoint,
    save_checkpoint,
)
from radiocnn.nn import LayerMode
from radiocnn.train import Adam, head_loss, l2_penalty

_PREFIX = struct.Struct("<4sIQ")


def train_step(model, adam, x, labels, step, seed=0):
    model.zero_grad()
    probs = model.forward(x, LayerMode.TRAINING, stream_for(seed, StreamPurpose.DROPOUT, 1, step))
    _, dlogits = head_loss(probs, labels)
    l2_penalty(model.parameters())
    model.backward(dlogits)
    adam.step(1e-2)


@pytest.fixture
def batch():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 1, (6, 8, 8, 1)).astype(np.float32)
    return x, np.array([0, 1, 2, 0, 1, 2])


@pytest.fixture
def saved(tmp_path, mini_spec, batch):
    model = build_model(mini_spec, seed=0)
    train_step(model, Adam(model.parameters()), *batch, step=0)
    path = save_checkpoint(
        model,
        tmp_path / "model.micf",
        include_optimizer=True,
        epoch=1,
        seed=0,
        optimizer_step=1,
        metadata={"class_names": ["a", "b", "c"]},
    )
    return model, path


def split_file(data: bytes) -> tuple[dict, int]:
    _, _, length = _PREFIX.unpack_from(data)
    return json.loads(data[_PREFIX.size : _PREFIX.size + length]), _PREFIX.size + length


class TestRoundTrip:
    def test_weights_and_buffers_survive(self, saved):
        model, path = saved
        loaded = load_checkpoint(path)
        for a, b in zip(model.parameters(), loaded.model.parameters()):
            assert a.name == b.name
            np.testing.assert_array_equal(a.value, b.value)
            np.testing.assert_array_equal(a.adam_m, b.adam_m)
            np.testing.assert_array_equal(a.adam_v, b.adam_v)
        for (name_a, a), (name_b, b) in zip(model.buffers(), loaded.model.buffers()):
            assert name_a == name_b
            np.testing.assert_array_equal(a, b)

    def test_predictions_are_bitwise_equal(self, saved, batch):
        model, path = saved
        loaded = load_checkpoint(path).model
        np.testing.assert_array_equal(model.predict(batch[0]), loaded.predict(batch[0]))

    def test_header_fields(self, saved):
        _, path = saved
        loaded = load_checkpoint(path)
        assert loaded.epoch == 1
        assert loaded.seed == 0
        assert loaded.optimizer_state is True
        assert loaded.optimizer_step == 1
        assert loaded.class_names == ["a", "b", "c"]
        header, _ = split_file(path.read_bytes())
        assert header["rng"]["generator"] == settings.RNG_GENERATOR_ID
        kinds = [t["kind"] for t in header["tensors"]]
        assert kinds == sorted(kinds, key=["param", "buffer", "adam_m", "adam_v"].index)

    def test_file_size_matches_manifest(self, saved):
        model, path = saved
        data = path.read_bytes()
        _, offset = split_file(data)
        elements = 3 * sum(p.size for p in model.parameters())
        elements += sum(b.size for _, b in model.buffers())
        assert len(data) - offset == 4 * elements

    def test_without_optimizer_state(self, tmp_path, mini_spec):
        model = build_model(mini_spec, seed=2)
        loaded = load_checkpoint(save_checkpoint(model, tmp_path / "w.micf"))
        assert loaded.optimizer_state is False
        assert loaded.optimizer_step == 0
        assert loaded.class_names == ["0", "1", "2"]
        assert all(not p.adam_m.any() for p in loaded.model.parameters())

    def test_resume_matches_uninterrupted_run(self, tmp_path, mini_spec, batch):
        straight = build_model(mini_spec, seed=0)
        adam = Adam(straight.parameters())
        for step in range(3):
            train_step(straight, adam, *batch, step=step)

        first = build_model(mini_spec, seed=0)
        train_step(first, Adam(first.parameters()), *batch, step=0)
        path = save_checkpoint(first, tmp_path / "mid.micf", include_optimizer=True, optimizer_step=1)
        loaded = load_checkpoint(path)
        resumed = loaded.model
        adam = Adam(resumed.parameters(), t=loaded.optimizer_step)
        for step in (1, 2):
            train_step(resumed, adam, *batch, step=step)

        for a, b in zip(straight.parameters(), resumed.parameters()):
            np.testing.assert_array_equal(a.value, b.value, err_msg=a.name)


class TestCorruption:
    def test_bad_magic(self, saved):
        _, path = saved
        data = path.read_bytes()
        path.write_bytes(b"XXXX" + data[4:])
        with pytest.raises(CheckpointMagicError):
            load_checkpoint(path)

    def test_future_version(self, saved):
        _, path = saved
        data = bytearray(path.read_bytes())
        struct.pack_into("<I", data, 4, settings.CHECKPOINT_VERSION + 1)
        path.write_bytes(bytes(data))
        with pytest.raises(CheckpointVersionError):
            load_checkpoint(path)

    def test_truncated_blob(self, saved):
        _, path = saved
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(CheckpointTruncatedError):
            load_checkpoint(path)

    def test_truncated_prefix(self, saved):
        _, path = saved
        path.write_bytes(path.read_bytes()[:10])
        with pytest.raises(CheckpointTruncatedError):
            load_checkpoint(path)

    def test_trailing_bytes(self, saved):
        _, path = saved
        path.write_bytes(path.read_bytes() + b"\x00" * 4)
        with pytest.raises(CheckpointShapeError, match="trailing"):
            load_checkpoint(path)

    def test_garbled_header(self, saved):
        _, path = saved
        data = path.read_bytes()
        _, offset = split_file(data)
        garbage = b"{" * (offset - _PREFIX.size)
        path.write_bytes(data[: _PREFIX.size] + garbage + data[offset:])
        with pytest.raises(CheckpointHeaderError):
            load_checkpoint(path)

    def test_architecture_disagrees_with_blobs(self, saved):
        _, path = saved
        data = path.read_bytes()
        header, offset = split_file(data)
        header["architecture"]["filters"] = [3, 4]
        encoded = json.dumps(header, sort_keys=True).encode("utf-8")
        prefix = _PREFIX.pack(settings.CHECKPOINT_MAGIC, settings.CHECKPOINT_VERSION, len(encoded))
        path.write_bytes(prefix + encoded + data[offset:])
        with pytest.raises(CheckpointShapeError):
            load_checkpoint(path)

    @pytest.mark.parametrize(
        "rng,match",
        [
            ({"seed": 0, "generator": "mt19937"}, "mt19937"),
            ({"seed": "zero", "generator": settings.RNG_GENERATOR_ID}, "seed"),
            ("philox", "seed"),
            (None, "seed"),
        ],
    )
    def test_rng_header_is_checked(self, saved, rng, match):
        _, path = saved
        data = path.read_bytes()
        header, offset = split_file(data)
        header["rng"] = rng
        encoded = json.dumps(header, sort_keys=True).encode("utf-8")
        prefix = _PREFIX.pack(settings.CHECKPOINT_MAGIC, settings.CHECKPOINT_VERSION, len(encoded))
        path.write_bytes(prefix + encoded + data[offset:])
        with pytest.raises(CheckpointHeaderError, match=match):
            load_checkpoint(path)
