"""
Deterministic Random Streams

This module wraps NumPy's Philox4x64-10 counter-based bit generator into `RngStream`,
the single source of randomness for weight initialization, dropout masks, data
shuffling, augmentation draws and the synthetic dataset generator.

Key features:
- `RngStream(seed, stream_id)`: the Philox key is the pair (seed, stream_id), so equal
  pairs replay bit-identical sequences on every platform and distinct stream ids give
  independent sequences.
- `derive_stream_id` / `stream_for`: stable stream ids keyed on a purpose and integer
  indices such as (epoch, sample index), which keeps results independent of thread
  scheduling.
- `rng_uniform` / `rng_normal`: tensor-valued draws. Normals use the Box-Muller
  transform on two uniforms (only the cosine branch is kept).

@dependencies
- `numpy.random.Philox`, `numpy.random.SeedSequence`.

@notes
- A stream has a single owner. Parallel consumers must use distinct stream ids.
- The generator id recorded in checkpoints and `run.json` is `settings.RNG_GENERATOR_ID`.
"""

from collections.abc import Sequence
from enum import IntEnum

import numpy as np
import numpy.typing as npt

from radiocnn import settings
from radiocnn.core.tensor import TRAIN_DTYPE, ShapeError, Tensor

_UINT64_MASK = (1 << 64) - 1


class StreamPurpose(IntEnum):
    """Namespaces for derived stream ids."""

    INIT = 1
    SHUFFLE = 2
    AUGMENT = 3
    DROPOUT = 4
    SPLIT = 5
    SYNTH = 6
    GRADCHECK = 7


class RngStream:
    """A reproducible random stream identified by (seed, stream id)."""

    generator_id: str = settings.RNG_GENERATOR_ID

    def __init__(self, seed: int, stream_id: int = 0):
        if not 0 <= seed <= _UINT64_MASK or not 0 <= stream_id <= _UINT64_MASK:
            raise ValueError("seed and stream_id must be unsigned 64-bit integers.")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._bit_generator = np.random.Philox(key=key)
        self.generator = np.random.Generator(self._bit_generator)

    @property
    def counter(self) -> int:
        """Current Philox block counter as a 256-bit integer."""
        words = self._bit_generator.state["state"]["counter"]
        return sum(int(word) << (64 * i) for i, word in enumerate(words))

    def replay(self) -> "RngStream":
        """A fresh stream with the same identity, positioned at counter zero."""
        return RngStream(self.seed, self.stream_id)

    def random(self, shape: Sequence[int] | int) -> npt.NDArray[np.float64]:
        """Float64 uniforms in [0, 1)."""
        return self.generator.random(shape)

    def permutation(self, n: int) -> npt.NDArray[np.int64]:
        return self.generator.permutation(n)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def derive_stream_id(purpose: StreamPurpose, *indices: int) -> int:
    """Maps (purpose, indices...) to a 64-bit stream id through `SeedSequence` hashing."""
    entropy = [int(purpose), *(int(i) for i in indices)]
    if any(value < 0 for value in entropy):
        raise ValueError(f"Stream indices must be non-negative, got {entropy}.")
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def stream_for(seed: int, purpose: StreamPurpose, *indices: int) -> RngStream:
    return RngStream(seed, derive_stream_id(purpose, *indices))


def _as_shape(shape: Sequence[int] | int) -> tuple[int, ...]:
    dims = (int(shape),) if isinstance(shape, (int, np.integer)) else tuple(int(d) for d in shape)
    if not dims or any(d < 1 for d in dims):
        raise ShapeError(f"Invalid tensor shape {shape}.")
    return dims


def rng_uniform(
    stream: RngStream,
    lo: float,
    hi: float,
    shape: Sequence[int] | int,
    dtype: npt.DTypeLike = TRAIN_DTYPE,
) -> Tensor:
    """
    Uniform draws in [lo, hi).

    Raises:
        ValueError: If the bounds are not finite or lo >= hi.
    """
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
        raise ValueError(f"Invalid uniform bounds: lo={lo}, hi={hi}.")
    shape = _as_shape(shape)
    values = (lo + (hi - lo) * stream.random(shape)).astype(dtype)
    # Rounding into a narrower dtype may land exactly on hi.
    ceiling = np.nextafter(np.asarray(hi, dtype=dtype), np.asarray(lo, dtype=dtype))
    np.minimum(values, ceiling, out=values)
    return np.atleast_1d(values)


def rng_normal(
    stream: RngStream,
    mean: float,
    stddev: float,
    shape: Sequence[int] | int,
    dtype: npt.DTypeLike = TRAIN_DTYPE,
) -> Tensor:
    """
    Normal draws via Box-Muller: z = sqrt(-2 ln(1 - u1)) * cos(2 pi u2).

    Raises:
        ValueError: If stddev is negative or not finite.
    """
    if not np.isfinite(stddev) or stddev < 0:
        raise ValueError(f"stddev must be finite and >= 0, got {stddev}.")
    shape = _as_shape(shape)
    size = int(np.prod(shape))
    pairs = stream.random((size, 2))
    radius = np.sqrt(-2.0 * np.log1p(-pairs[:, 0]))
    z = radius * np.cos(2.0 * np.pi * pairs[:, 1])
    values = (mean + stddev * z).reshape(shape)
    return np.atleast_1d(values.astype(dtype))

