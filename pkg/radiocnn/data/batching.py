"""
Batching and Prefetch

Turns `SampleRecord` lists into `Batch` streams: decode -> resize -> rescale ->
(training only) augment -> collate.

Key features:
- `RecordSource.batches(epoch)`: training order is a permutation drawn from a stream
  keyed on (seed, epoch); evaluation order is the record order.
- Per-sample augmentation streams keyed on (seed, epoch, record index), so batch content
  does not depend on prefetch depth or worker count.
- Prefetch: a producer thread fills a bounded `queue.Queue` of `prefetch_depth` batches;
  depth 0 runs inline.
- Optional thread pool (`workers > 1`) prepares the samples of one batch in parallel;
  results are collated in record order.
- Strict mode (default) aborts on a decode failure; otherwise the sample is skipped with
  a warning.

@dependencies
- `numpy` for collation, `threading`/`queue`/`concurrent.futures` for the producer side.
- `radiocnn.data.codec`, `radiocnn.data.transforms`.
"""

import logging
import queue
import threading
from collections.abc import Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Protocol, TypeVar

import numpy as np
import numpy.typing as npt

from radiocnn.core import StreamPurpose, stream_for
from radiocnn.data.codec import DecodeError, match_channels, read_image
from radiocnn.data.scan import DatasetError, SampleRecord
from radiocnn.data.transforms import augment_sample, rescale, resize_bilinear
from radiocnn.nn import LayerMode
from radiocnn.schemas import PipelineConfig

logger = logging.getLogger(__name__)

T = TypeVar("T")

_POLL_SECONDS = 0.1


@dataclass
class Batch:
    inputs: npt.NDArray[np.float32]
    labels: npt.NDArray[np.int64]
    indices: npt.NDArray[np.int64]

    def __len__(self) -> int:
        return int(self.labels.shape[0])


class BatchSource(Protocol):
    def batches(self, epoch: int = 1) -> Iterator[Batch]: ...

    def __len__(self) -> int: ...


def _put(buffer: queue.Queue, item: tuple[str, Any], stop: threading.Event) -> bool:
    while not stop.is_set():
        try:
            buffer.put(item, timeout=_POLL_SECONDS)
            return True
        except queue.Full:
            continue
    return False


def prefetch(items: Iterator[T], depth: int) -> Iterator[T]:
    """
    Yields `items` in order while a producer thread stays up to `depth` items ahead.

    Exceptions raised by the producer are re-raised in the consumer. Closing the consumer
    early stops the producer.
    """
    if depth <= 0:
        yield from items
        return

    buffer: queue.Queue = queue.Queue(maxsize=depth)
    stop = threading.Event()

    def produce() -> None:
        try:
            for item in items:
                if not _put(buffer, ("item", item), stop):
                    return
            _put(buffer, ("done", None), stop)
        except BaseException as e:  # re-raised on the consumer side
            _put(buffer, ("error", e), stop)
        finally:
            close = getattr(items, "close", None)
            if close is not None:
                close()

    producer = threading.Thread(target=produce, name="radiocnn-prefetch", daemon=True)
    producer.start()
    try:
        while True:
            kind, payload = buffer.get()
            if kind == "done":
                return
            if kind == "error":
                raise payload
            yield payload
    finally:
        stop.set()
        producer.join()


class RecordSource:
    """A re-iterable batch source over a fixed record list."""

    def __init__(
        self,
        records: Sequence[SampleRecord],
        cfg: PipelineConfig,
        mode: LayerMode = LayerMode.INFERENCE,
    ):
        self.records = list(records)
        self.cfg = cfg
        self.mode = mode

    def __len__(self) -> int:
        return len(self.records)

    @property
    def num_batches(self) -> int:
        return -(-len(self.records) // self.cfg.batch_size)

    @property
    def augmenting(self) -> bool:
        return self.mode is LayerMode.TRAINING and self.cfg.augment

    def order(self, epoch: int) -> npt.NDArray[np.int64]:
        if self.mode is LayerMode.TRAINING:
            return stream_for(self.cfg.seed, StreamPurpose.SHUFFLE, epoch).permutation(
                len(self.records)
            )
        return np.arange(len(self.records), dtype=np.int64)

    def base_image(self, index: int) -> npt.NDArray[np.float32]:
        """Decoded, resized and rescaled image of record `index`, before augmentation."""
        record = self.records[index]
        if record.pixels is not None:
            pixels = match_channels(record.pixels, self.cfg.channels)
        else:
            pixels = read_image(record.path, self.cfg.channels, self.cfg.allow_jpeg)
        height, width = self.cfg.image_size
        return rescale(resize_bilinear(pixels, height, width))

    def load(self, index: int, epoch: int) -> npt.NDArray[np.float32] | None:
        try:
            image = self.base_image(index)
        except DecodeError as e:
            if self.cfg.strict:
                raise
            logger.warning(f"Skipping undecodable image: {e}")
            return None
        if self.augmenting:
            stream = stream_for(self.cfg.seed, StreamPurpose.AUGMENT, epoch, index)
            image = augment_sample(
                image,
                stream,
                rotation_limit_deg=self.cfg.rotation_limit_deg,
                zoom_limit=self.cfg.zoom_limit,
                flip_probability=self.cfg.flip_probability,
            )
        return image

    def _collate(
        self, indices: npt.NDArray[np.int64], images: list[npt.NDArray[np.float32] | None]
    ) -> Batch | None:
        kept = [(i, img) for i, img in zip(indices.tolist(), images) if img is not None]
        if not kept:
            return None
        kept_indices = np.array([i for i, _ in kept], dtype=np.int64)
        return Batch(
            inputs=np.stack([img for _, img in kept]).astype(np.float32, copy=False),
            labels=np.array([self.records[i].label for i in kept_indices], dtype=np.int64),
            indices=kept_indices,
        )

    def _generate(self, epoch: int) -> Iterator[Batch]:
        order = self.order(epoch)
        size = self.cfg.batch_size
        chunks = [order[start : start + size] for start in range(0, len(order), size)]
        if self.cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.workers) as pool:
                for chunk in chunks:
                    images = list(pool.map(lambda i: self.load(int(i), epoch), chunk))
                    batch = self._collate(chunk, images)
                    if batch is not None:
                        yield batch
            return
        for chunk in chunks:
            batch = self._collate(chunk, [self.load(int(i), epoch) for i in chunk])
            if batch is not None:
                yield batch

    def batches(self, epoch: int = 1) -> Iterator[Batch]:
        if epoch < 1:
            raise ValueError(f"Epochs are 1-based, got {epoch}.")
        if not self.records:
            raise DatasetError("Cannot iterate an empty record list.")
        return prefetch(self._generate(epoch), self.cfg.prefetch_depth)


def batch_iter(
    records: Sequence[SampleRecord],
    cfg: PipelineConfig,
    mode: LayerMode = LayerMode.INFERENCE,
    epoch: int = 1,
) -> Iterator[Batch]:
    return RecordSource(records, cfg, mode).batches(epoch)
