"""
radiocnn Data Subpackage

Dataset scanning, image decoding, resizing and augmentation, stratified splitting,
batching with prefetch, and the synthetic dataset generator.
"""

from .batching import Batch, BatchSource, RecordSource, batch_iter, prefetch
from .codec import DecodeError, decode_image, encode_pgm, encode_png, match_channels, read_image
from .scan import DatasetError, DatasetScan, SampleRecord, scan_dataset_dir
from .split import split_train_val, validation_count
from .synthetic import CLASS_NAMES, SyntheticSummary, gen_synthetic, synthetic_image
from .transforms import (
    AugmentParams,
    apply_augmentation,
    augment_sample,
    draw_augmentation,
    flip_horizontal,
    rescale,
    resize_bilinear,
    rotate,
    zoom,
)

__all__ = [
    "Batch",
    "BatchSource",
    "RecordSource",
    "batch_iter",
    "prefetch",
    "DecodeError",
    "decode_image",
    "encode_pgm",
    "encode_png",
    "match_channels",
    "read_image",
    "DatasetError",
    "DatasetScan",
    "SampleRecord",
    "scan_dataset_dir",
    "split_train_val",
    "validation_count",
    "CLASS_NAMES",
    "SyntheticSummary",
    "gen_synthetic",
    "synthetic_image",
    "AugmentParams",
    "apply_augmentation",
    "augment_sample",
    "draw_augmentation",
    "flip_horizontal",
    "rescale",
    "resize_bilinear",
    "rotate",
    "zoom",
]
