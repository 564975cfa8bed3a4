import logging
import math
from collections import defaultdict
from collections.abc import Sequence

from radiocnn import settings
from radiocnn.core import StreamPurpose, stream_for
from radiocnn.data.scan import DatasetError, SampleRecord

logger = logging.getLogger(__name__)


def validation_count(n: int, val_fraction: float) -> int:
    """ceil(val_fraction * n), capped so at least one sample stays in training."""
    # rounding first keeps ceil(0.2 * 15) at 3 rather than 4
    return min(n - 1, max(1, math.ceil(round(val_fraction * n, 9))))


def split_train_val(
    records: Sequence[SampleRecord],
    val_fraction: float = settings.DEFAULT_VAL_FRACTION,
    seed: int = settings.DEFAULT_SEED,
) -> tuple[list[SampleRecord], list[SampleRecord]]:
    """
    Stratified train/validation partition.

    Each class is shuffled with a stream keyed on (seed, class index) and its last
    ceil(val_fraction * n) records go to validation. Both outputs keep class order.

    Raises:
        DatasetError: If a class has fewer than 2 records or the fraction is not in (0, 1).
    """
    if not 0.0 < val_fraction < 1.0:
        raise DatasetError(f"val_fraction must lie in (0, 1), got {val_fraction}.")
    by_class: dict[int, list[SampleRecord]] = defaultdict(list)
    for record in records:
        by_class[record.label].append(record)

    train: list[SampleRecord] = []
    val: list[SampleRecord] = []
    for label in sorted(by_class):
        members = by_class[label]
        if len(members) < 2:
            raise DatasetError(
                f"Class '{members[0].class_name}' has {len(members)} sample; a split needs at least 2."
            )
        order = stream_for(seed, StreamPurpose.SPLIT, label).permutation(len(members))
        shuffled = [members[i] for i in order]
        n_val = validation_count(len(members), val_fraction)
        train.extend(shuffled[:-n_val])
        val.extend(shuffled[-n_val:])
        logger.debug(f"Class {label}: {len(members) - n_val} train / {n_val} validation.")
    return train, val
