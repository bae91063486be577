"""Assembles dataset and benchmark rows into model-ready feature splits.

Image features come from the per-record store keyed by image id. Rewritten
captions never appear in that store, so text features come from a caption
store keyed by row ordinal (produced by ``encode_captions`` over the same
file, in the same order).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ShapeMismatch
from .formats import BenchmarkItem, DatasetRow, store_lookup
from .training import ArraySplit

_BINARY_INDEX = {"truthful": 0, "ooc": 1, "nei": 1, "falsified": 1}
_TERNARY_INDEX = {"truthful": 0, "ooc": 1, "nei": 2}


def label_index(label: str, classes: int) -> int:
    table = _BINARY_INDEX if classes == 2 else _TERNARY_INDEX
    try:
        return table[label]
    except KeyError:
        raise ValueError(f"label {label!r} is not usable with {classes} classes") from None


def _gather(
    image_ids: Sequence[int],
    captions_count: int,
    image_store: tuple[np.ndarray, np.ndarray],
    caption_store: tuple[np.ndarray, np.ndarray],
) -> tuple[np.ndarray, np.ndarray]:
    image_rows = store_lookup(image_store[0], image_store[1], image_ids)
    cap_ids, cap_matrix = caption_store
    if len(cap_ids) != captions_count:
        raise ShapeMismatch(
            f"caption store holds {len(cap_ids)} rows for {captions_count} captions; "
            "re-encode from the same file"
        )
    expected = np.arange(captions_count, dtype=np.uint64)
    if not np.array_equal(cap_ids, expected):
        raise ShapeMismatch("caption store must be keyed by row ordinal")
    return image_rows, cap_matrix


def assemble_split(
    rows: Sequence[DatasetRow],
    image_store: tuple[np.ndarray, np.ndarray],
    caption_store: tuple[np.ndarray, np.ndarray],
    classes: int,
) -> ArraySplit:
    labels = np.array([label_index(r.label, classes) for r in rows], dtype=np.int64)
    image_rows, text_rows = _gather(
        [r.image_id for r in rows], len(rows), image_store, caption_store
    )
    return ArraySplit(image=image_rows, text=text_rows, labels=labels)


def assemble_inference(
    items: Sequence[BenchmarkItem],
    image_store: tuple[np.ndarray, np.ndarray],
    caption_store: tuple[np.ndarray, np.ndarray],
) -> tuple[np.ndarray, np.ndarray]:
    return _gather([it.image_id for it in items], len(items), image_store, caption_store)
