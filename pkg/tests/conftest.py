"""Shared fixtures: small synthetic datasets and mini architectures."""

from pathlib import Path

import numpy as np
import pytest

from radiocnn.data import SampleRecord, gen_synthetic
from radiocnn.schemas import ArchitectureSpec, PipelineConfig

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory) -> Path:
    """6 training and 2 test images per class, 16x16 grayscale PNGs."""
    root = tmp_path_factory.mktemp("tiny") / "synth"
    gen_synthetic(root, per_class=6, size=16, seed=3, test_per_class=2)
    return root


@pytest.fixture
def mini_spec() -> ArchitectureSpec:
    return ArchitectureSpec(
        arch="ccnn", input_shape=(8, 8, 1), num_classes=3, filters=(2, 4), dense_width=8
    )


@pytest.fixture
def pipeline_8px() -> PipelineConfig:
    return PipelineConfig(image_size=(8, 8), channels=1, batch_size=4, prefetch_depth=0)


def make_records(count: int, k: int = 3, size: int = 8, seed: int = 0) -> list[SampleRecord]:
    """In-memory records with 0..255 pixels and round-robin labels."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(count):
        label = i % k
        pixels = rng.uniform(0.0, 255.0, (size, size, 1)).astype(np.float32)
        records.append(SampleRecord(label=label, class_name=f"c{label}", pixels=pixels, key=f"r{i}"))
    return records
