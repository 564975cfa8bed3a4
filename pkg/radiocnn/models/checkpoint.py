"""
Checkpoint Files

This module saves and loads models in the `.micf` container:

    b"MICF" | u32 version | u64 header length | UTF-8 JSON header | tensor blobs

Blobs are raw little-endian float32 arrays in registry order: every parameter value,
then every BatchNorm running statistic, then (when the optimizer flag is set) every Adam
first moment followed by every Adam second moment. The header lists each blob's name,
kind and shape, so a reader can check the file against the rebuilt architecture before
any weights are accepted.

Key features:
- `save_checkpoint(model, path, include_optimizer=...)`.
- `load_checkpoint(path) -> LoadedCheckpoint` with the rebuilt model, the Adam step count
  and the header metadata (class names, image size).
- Distinct error classes for a bad magic, an unsupported version, an unreadable header,
  a truncated file and a blob manifest that disagrees with the architecture.

@dependencies
- `numpy` for blob encoding, `struct` for the fixed-width prefix, `json` for the header.
- `radiocnn.models.zoo.build_model`.
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import ValidationError

from radiocnn import settings
from radiocnn.errors import RadiocnnError
from radiocnn.models.zoo import ArchitectureError, Model, build_model
from radiocnn.schemas import ArchitectureSpec

logger = logging.getLogger(__name__)

_PREFIX = struct.Struct("<4sIQ")
_BLOB_DTYPE = np.dtype("<f4")


class CheckpointError(RadiocnnError):
    """Base class for unreadable or inconsistent checkpoint files."""

    pass


class CheckpointMagicError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointHeaderError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


@dataclass
class LoadedCheckpoint:
    model: Model
    epoch: int
    seed: int
    optimizer_state: bool
    optimizer_step: int
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def class_names(self) -> list[str]:
        names = self.metadata.get("class_names")
        if names:
            return list(names)
        return [str(i) for i in range(self.model.spec.num_classes)]


def _manifest(model: Model, include_optimizer: bool) -> list[tuple[str, str, np.ndarray]]:
    params = model.parameters()
    entries = [(p.name, "param", p.value) for p in params]
    entries += [(name, "buffer", buf) for name, buf in model.buffers()]
    if include_optimizer:
        entries += [(p.name, "adam_m", p.adam_m) for p in params]
        entries += [(p.name, "adam_v", p.adam_v) for p in params]
    return entries


def save_checkpoint(
    model: Model,
    path: Path | str,
    include_optimizer: bool = False,
    *,
    epoch: int = 0,
    seed: int = 0,
    optimizer_step: int = 0,
    metadata: dict[str, Any] | None = None,
) -> Path:
    """Writes `model` to `path` and returns the path."""
    path = Path(path)
    entries = _manifest(model, include_optimizer)
    header = {
        "magic": settings.CHECKPOINT_MAGIC.decode("ascii"),
        "format_version": settings.CHECKPOINT_VERSION,
        "architecture": model.spec.model_dump(mode="json"),
        "dtype": "float32",
        "epoch": int(epoch),
        "rng": {"seed": int(seed), "generator": settings.RNG_GENERATOR_ID},
        "optimizer_state": bool(include_optimizer),
        "optimizer_step": int(optimizer_step) if include_optimizer else 0,
        "tensors": [
            {"name": name, "kind": kind, "shape": list(array.shape)}
            for name, kind, array in entries
        ],
        "metadata": metadata or {},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    chunks = [
        _PREFIX.pack(settings.CHECKPOINT_MAGIC, settings.CHECKPOINT_VERSION, len(header_bytes)),
        header_bytes,
    ]
    chunks += [np.ascontiguousarray(array, dtype=_BLOB_DTYPE).tobytes() for _, _, array in entries]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(chunks))
    logger.info(
        f"Saved checkpoint {path} ({len(entries)} tensors, optimizer state: {include_optimizer})."
    )
    return path


def _read_header(data: bytes) -> tuple[dict[str, Any], int]:
    if len(data) < _PREFIX.size:
        raise CheckpointTruncatedError(
            f"File holds {len(data)} bytes, shorter than the {_PREFIX.size}-byte prefix."
        )
    magic, version, header_length = _PREFIX.unpack_from(data)
    if magic != settings.CHECKPOINT_MAGIC:
        raise CheckpointMagicError(
            f"Bad magic {magic!r}; expected {settings.CHECKPOINT_MAGIC!r}. Not a radiocnn checkpoint."
        )
    if version != settings.CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"Unsupported checkpoint version {version}; this build reads version {settings.CHECKPOINT_VERSION}."
        )
    end = _PREFIX.size + header_length
    if end > len(data):
        raise CheckpointTruncatedError(
            f"Header claims {header_length} bytes but only {len(data) - _PREFIX.size} remain."
        )
    try:
        header = json.loads(data[_PREFIX.size : end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointHeaderError(f"Header is not valid UTF-8 JSON: {e}") from e
    if not isinstance(header, dict):
        raise CheckpointHeaderError("Header must be a JSON object.")
    missing = {"architecture", "tensors", "optimizer_state"} - header.keys()
    if missing:
        raise CheckpointHeaderError(f"Header is missing keys: {sorted(missing)}.")
    if header.get("magic") != settings.CHECKPOINT_MAGIC.decode("ascii"):
        raise CheckpointMagicError(f"Header names format {header.get('magic')!r}.")
    if header.get("format_version") != settings.CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"Header records format version {header.get('format_version')!r}."
        )
    rng = header.get("rng")
    if not isinstance(rng, dict) or type(rng.get("seed")) is not int or rng["seed"] < 0:
        raise CheckpointHeaderError(f"Header 'rng' must hold a non-negative integer seed, got {rng!r}.")
    if rng.get("generator") != settings.RNG_GENERATOR_ID:
        raise CheckpointHeaderError(
            f"Checkpoint was written with generator {rng.get('generator')!r};"
            f" this build uses {settings.RNG_GENERATOR_ID!r}."
        )
    return header, end


def load_checkpoint(path: Path | str) -> LoadedCheckpoint:
    """
    Reads a checkpoint and rebuilds its model.

    Every structural check runs before any weight is copied, so a failing load never
    returns a partially filled model.

    Raises:
        CheckpointError: One of its subclasses, naming what disagreed.
    """
    path = Path(path)
    data = path.read_bytes()
    header, offset = _read_header(data)

    try:
        spec = ArchitectureSpec.model_validate(header["architecture"])
    except ValidationError as e:
        raise CheckpointHeaderError(f"Header architecture is invalid: {e}") from e
    try:
        model = build_model(spec, seed=header["rng"]["seed"])
    except ArchitectureError as e:
        raise CheckpointHeaderError(f"Header architecture cannot be built: {e}") from e

    include_optimizer = bool(header["optimizer_state"])
    expected = _manifest(model, include_optimizer)
    recorded = header["tensors"]
    if not isinstance(recorded, list) or len(recorded) != len(expected):
        raise CheckpointShapeError(
            f"Checkpoint lists {len(recorded) if isinstance(recorded, list) else '?'} tensors;"
            f" the {spec.arch} architecture needs {len(expected)}."
        )
    for entry, (name, kind, array) in zip(recorded, expected):
        if (
            not isinstance(entry, dict)
            or entry.get("name") != name
            or entry.get("kind") != kind
            or tuple(entry.get("shape", ())) != array.shape
        ):
            raise CheckpointShapeError(
                f"Tensor {entry!r} does not match {kind} '{name}' with shape {list(array.shape)}."
            )

    needed = sum(array.size for _, _, array in expected) * _BLOB_DTYPE.itemsize
    available = len(data) - offset
    if available < needed:
        raise CheckpointTruncatedError(
            f"Tensor data holds {available} bytes; the manifest needs {needed}."
        )
    if available > needed:
        raise CheckpointShapeError(
            f"{available - needed} unexpected trailing bytes after the tensor data."
        )

    blobs = []
    for _, _, array in expected:
        nbytes = array.size * _BLOB_DTYPE.itemsize
        blobs.append(
            np.frombuffer(data, dtype=_BLOB_DTYPE, count=array.size, offset=offset).reshape(
                array.shape
            )
        )
        offset += nbytes
    for (_, _, array), blob in zip(expected, blobs):
        array[...] = blob

    logger.info(f"Loaded checkpoint {path} ({spec.arch}, epoch {header.get('epoch', 0)}).")
    return LoadedCheckpoint(
        model=model,
        epoch=int(header.get("epoch", 0)),
        seed=header["rng"]["seed"],
        optimizer_state=include_optimizer,
        optimizer_step=int(header.get("optimizer_step", 0)),
        metadata=dict(header.get("metadata") or {}),
    )
