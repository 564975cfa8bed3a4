"""
Dataset Directory Scanning

Reads the directory layout

    root/train/<CLASS>/*.png|*.pgm
    root/test/<CLASS>/*          (optional)

into `SampleRecord` lists. Class names are the `train/` subfolder names sorted
lexicographically and numbered from 0, so COVID19 -> 0, NORMAL -> 1, PNEUMONIA -> 2 on
the usual chest-X-ray layout. Files are sorted by name within each class.

Files with other extensions are skipped and counted; the count is logged as a warning.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import numpy.typing as npt

from radiocnn import settings
from radiocnn.errors import RadiocnnError

logger = logging.getLogger(__name__)

SPLITS = ("train", "test")


class DatasetError(RadiocnnError):
    pass


@dataclass(frozen=True)
class SampleRecord:
    """
    One labeled image: a file path or an in-memory (h, w, c) array of 0..255 values.

    Records compare by source path (or `key` for in-memory pixels), label and class name.
    """

    label: int
    class_name: str
    path: Path | None = None
    pixels: npt.NDArray[np.floating] | None = field(default=None, compare=False, repr=False)
    key: str = ""

    def __post_init__(self):
        if (self.path is None) == (self.pixels is None):
            raise DatasetError("A SampleRecord needs exactly one of path or pixels.")

    @property
    def source(self) -> str:
        return str(self.path) if self.path is not None else self.key or "<pixels>"


@dataclass
class DatasetScan:
    root: Path
    class_names: list[str]
    splits: dict[str, list[SampleRecord]]
    skipped: dict[str, int] = field(default_factory=dict)

    def records(self, split: str) -> list[SampleRecord]:
        if split not in self.splits:
            raise DatasetError(
                f"Dataset {self.root} has no '{split}' split; expected {self.root / split}/<CLASS>/."
            )
        return self.splits[split]

    def counts(self) -> dict[str, dict[str, int]]:
        """Per split, the number of images per class name (0 for absent classes)."""
        table = {}
        for split, records in self.splits.items():
            tally = Counter(r.class_name for r in records)
            table[split] = {name: tally.get(name, 0) for name in self.class_names}
        return table


def _image_suffixes(allow_jpeg: bool) -> tuple[str, ...]:
    suffixes = settings.IMAGE_EXTENSIONS
    return suffixes + settings.JPEG_EXTENSIONS if allow_jpeg else suffixes


def _scan_split(
    split_dir: Path, class_names: list[str], suffixes: tuple[str, ...], require_all: bool
) -> tuple[list[SampleRecord], int]:
    records: list[SampleRecord] = []
    skipped = sum(1 for p in split_dir.iterdir() if p.is_file())
    for label, name in enumerate(class_names):
        class_dir = split_dir / name
        if not class_dir.is_dir():
            if require_all:
                raise DatasetError(f"Class folder {class_dir} is missing.")
            continue
        files = sorted((p for p in class_dir.iterdir() if p.is_file()), key=lambda p: p.name)
        images = [p for p in files if p.suffix.lower() in suffixes]
        skipped += len(files) - len(images)
        if not images:
            raise DatasetError(f"Class folder '{name}' in {split_dir} holds no images.")
        records.extend(SampleRecord(label=label, class_name=name, path=p) for p in images)
    return records, skipped


def scan_dataset_dir(root: Path | str, allow_jpeg: bool = settings.ENABLE_JPEG) -> DatasetScan:
    """
    Scans a dataset root.

    Raises:
        DatasetError: If `train/` is missing or has no class folders, if a class folder
            holds no images, or if `test/` has a class folder `train/` lacks.
    """
    root = Path(root)
    train_dir = root / "train"
    if not train_dir.is_dir():
        raise DatasetError(f"Dataset root {root} has no train/ directory.")
    class_names = sorted(p.name for p in train_dir.iterdir() if p.is_dir())
    if not class_names:
        raise DatasetError(f"{train_dir} has no class subfolders.")

    suffixes = _image_suffixes(allow_jpeg)
    splits: dict[str, list[SampleRecord]] = {}
    skipped: dict[str, int] = {}
    splits["train"], skipped["train"] = _scan_split(train_dir, class_names, suffixes, True)

    test_dir = root / "test"
    if test_dir.is_dir():
        unknown = sorted(p.name for p in test_dir.iterdir() if p.is_dir() and p.name not in class_names)
        if unknown:
            raise DatasetError(f"test/ has classes missing from train/: {', '.join(unknown)}.")
        splits["test"], skipped["test"] = _scan_split(test_dir, class_names, suffixes, False)

    for split, count in skipped.items():
        if count:
            logger.warning(f"Skipped {count} non-image files under {root / split}.")
    logger.info(
        f"Scanned {root}: {len(class_names)} classes, "
        + ", ".join(f"{len(r)} {s} images" for s, r in splits.items())
    )
    return DatasetScan(root=root, class_names=class_names, splits=splits, skipped=skipped)
