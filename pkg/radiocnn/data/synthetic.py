"""
Synthetic Dataset Generator

Writes a small three-class dataset in the same directory layout as the chest-X-ray set,
for desk-scale training runs and tests:

- class 0 (COVID19): centred Gaussian blob, sigma = size / 6
- class 1 (NORMAL): vertical stripes, period size / 8
- class 2 (PNEUMONIA): checkerboard, cell size / 8

Every image gets additive uniform noise in [-25.5, 25.5) (0.1 * 255), is clamped to
[0, 255], rounded to 8 bits and stored as a grayscale PNG. A `manifest.json` records
the generator parameters and file counts.

@notes
- Each image's noise comes from its own stream keyed on (seed, split, class, index), so
  equal arguments give byte-identical trees.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import numpy.typing as npt

from radiocnn import settings
from radiocnn.core import StreamPurpose, rng_uniform, stream_for
from radiocnn.data.codec import encode_png
from radiocnn.data.scan import DatasetError

logger = logging.getLogger(__name__)

GENERATOR_NAME = "radiocnn.synthetic"
CLASS_NAMES = ("COVID19", "NORMAL", "PNEUMONIA")
PATTERNS = ("blob", "stripes", "checkerboard")
NOISE_AMPLITUDE = 0.1 * settings.PIXEL_MAX


def blob_pattern(size: int) -> npt.NDArray[np.float64]:
    sigma = size / 6.0
    centre = (size - 1) / 2.0
    coords = np.arange(size, dtype=np.float64) - centre
    r2 = coords[:, None] ** 2 + coords[None, :] ** 2
    return settings.PIXEL_MAX * np.exp(-r2 / (2.0 * sigma**2))


def stripes_pattern(size: int) -> npt.NDArray[np.float64]:
    half_period = max(1, size // 16)
    columns = (np.arange(size) // half_period) % 2
    return np.tile(columns * settings.PIXEL_MAX, (size, 1)).astype(np.float64)


def checkerboard_pattern(size: int) -> npt.NDArray[np.float64]:
    cell = max(1, size // 8)
    index = np.arange(size) // cell
    return ((index[:, None] + index[None, :]) % 2 * settings.PIXEL_MAX).astype(np.float64)


_PATTERN_FUNCTIONS = {
    "blob": blob_pattern,
    "stripes": stripes_pattern,
    "checkerboard": checkerboard_pattern,
}


def synthetic_image(pattern: str, size: int, seed: int, *indices: int) -> npt.NDArray[np.uint8]:
    base = _PATTERN_FUNCTIONS[pattern](size)
    noise = rng_uniform(
        stream_for(seed, StreamPurpose.SYNTH, *indices),
        -NOISE_AMPLITUDE,
        NOISE_AMPLITUDE,
        (size, size),
        dtype=np.float64,
    )
    return np.rint(np.clip(base + noise, 0.0, settings.PIXEL_MAX)).astype(np.uint8)


@dataclass
class SyntheticSummary:
    root: Path
    counts: dict[str, dict[str, int]]
    manifest: Path

    @property
    def total(self) -> int:
        return sum(sum(c.values()) for c in self.counts.values())


def gen_synthetic(
    out_dir: Path | str,
    per_class: int,
    size: int,
    seed: int = settings.DEFAULT_SEED,
    test_per_class: int = 0,
) -> SyntheticSummary:
    """
    Generates the dataset under `out_dir` (train/ always, test/ when `test_per_class > 0`).

    Raises:
        ValueError: If `per_class` or `size` is not positive.
        DatasetError: If the directory cannot be written.
    """
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}.")
    if size < 2:
        raise ValueError(f"size must be >= 2, got {size}.")
    if test_per_class < 0:
        raise ValueError(f"test_per_class must be >= 0, got {test_per_class}.")

    root = Path(out_dir)
    splits = {"train": per_class}
    if test_per_class:
        splits["test"] = test_per_class

    counts: dict[str, dict[str, int]] = {}
    try:
        for split_index, (split, count) in enumerate(splits.items()):
            counts[split] = {}
            for label, (name, pattern) in enumerate(zip(CLASS_NAMES, PATTERNS)):
                class_dir = root / split / name
                class_dir.mkdir(parents=True, exist_ok=True)
                for i in range(count):
                    pixels = synthetic_image(pattern, size, seed, split_index, label, i)
                    (class_dir / f"{pattern}_{i:05d}.png").write_bytes(encode_png(pixels))
                counts[split][name] = count

        manifest = {
            "generator": GENERATOR_NAME,
            "seed": seed,
            "size": size,
            "per_class": per_class,
            "test_per_class": test_per_class,
            "classes": dict(zip(CLASS_NAMES, PATTERNS)),
            "counts": counts,
            "noise_amplitude": NOISE_AMPLITUDE,
            "rng_generator": settings.RNG_GENERATOR_ID,
        }
        manifest_path = root / settings.SYNTHETIC_MANIFEST
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise DatasetError(f"Cannot write synthetic dataset to {root}: {e}") from e

    summary = SyntheticSummary(root=root, counts=counts, manifest=manifest_path)
    logger.info(f"Generated {summary.total} synthetic images under {root}.")
    return summary
