"""Importers that normalize published external datasets into native records.

Supported layouts:

* ``newsclippings``: a JSON object with an ``annotations`` array (or a
  bare array / JSONL) of ``{id, image_id, falsified, caption?}``. When
  ``caption`` is absent it is resolved from a supplied corpus by ``id``.
  Falsified entries are out-of-context by construction.
* ``meir``: same record shape; falsified entries are entity
  manipulations, so they import as NEI.
* ``cosmos-test``: array or JSONL of
  ``{img_local_path, caption1, caption2?, context_label}``. Only the
  first caption survives import; the second one leaks the answer and is
  dropped here, unconditionally.
"""

from __future__ import annotations

import json
from enum import Enum
from pathlib import Path
from typing import Iterable

from .engine import GeneratedPair, Label, Provenance
from .errors import IoFailure, MalformedRecord, UnsupportedFormat
from .evaluation import BinaryLabel, EvalItem
from .records import Corpus


class ExternalFormat(str, Enum):
    NEWSCLIPPINGS = "newsclippings"
    MEIR = "meir"
    COSMOS_TEST = "cosmos-test"


def _iter_objects(path: str | Path) -> Iterable[tuple[int, dict]]:
    """Yield (ordinal, record) from a JSON array, an {"annotations": [...]}
    wrapper, or JSONL. Ordinals are 1-based and name the failing entry in
    errors."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(path), str(exc)) from None
    stripped = text.lstrip()
    if stripped.startswith("[") or stripped.startswith("{"):
        head = None
        try:
            head = json.loads(text)
        except json.JSONDecodeError:
            pass  # multi-line JSONL whose first line opens with "{"
        if isinstance(head, list):
            entries = head
        elif isinstance(head, dict):
            entries = head.get("annotations")
            if not isinstance(entries, list):
                raise MalformedRecord(1, "expected an array or an object with an 'annotations' array")
        else:
            entries = None
        if entries is not None:
            for ordinal, obj in enumerate(entries, start=1):
                if not isinstance(obj, dict):
                    raise MalformedRecord(ordinal, "expected an object")
                yield ordinal, obj
            return
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(lineno, f"invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise MalformedRecord(lineno, "expected an object")
        yield lineno, obj


def _require(obj: dict, key: str, ordinal: int):
    if key not in obj:
        raise MalformedRecord(ordinal, f"missing field {key!r}")
    return obj[key]


def _import_pairs(
    path: str | Path, falsified_label: Label, source_tag: str, corpus: Corpus | None
) -> list[GeneratedPair]:
    pairs = []
    for ordinal, obj in _iter_objects(path):
        rec_id = int(_require(obj, "id", ordinal))
        image_id = int(_require(obj, "image_id", ordinal))
        falsified = _require(obj, "falsified", ordinal)
        if not isinstance(falsified, bool):
            raise MalformedRecord(ordinal, "'falsified' must be a boolean")
        caption = obj.get("caption")
        if caption is None:
            if corpus is None:
                raise MalformedRecord(ordinal, "no caption and no corpus to resolve it from")
            caption = corpus.get(rec_id).caption
        label = falsified_label if falsified else Label.TRUTHFUL
        pairs.append(
            GeneratedPair(
                image_id=image_id,
                caption_text=str(caption),
                label=label,
                provenance=Provenance(strategy=source_tag, source_id=rec_id, donor_id=None, seed=0),
            )
        )
    return pairs


def _import_cosmos(path: str | Path) -> list[EvalItem]:
    items = []
    for ordinal, obj in _iter_objects(path):
        image = str(_require(obj, "img_local_path", ordinal))
        caption = str(_require(obj, "caption1", ordinal))
        context_label = _require(obj, "context_label", ordinal)
        if context_label not in (0, 1):
            raise MalformedRecord(ordinal, "'context_label' must be 0 or 1")
        true_label = BinaryLabel.FALSIFIED if context_label == 1 else BinaryLabel.TRUTHFUL
        items.append(
            EvalItem(
                id=obj.get("id", ordinal - 1),
                image_id=image,
                caption=caption,
                true_label=true_label,
            )
        )
    return items


def import_external(fmt: str | ExternalFormat, path: str | Path, corpus: Corpus | None = None):
    """Normalize an external dataset file.

    Returns GeneratedPair records for training-set formats and EvalItem
    records for the evaluation benchmark.
    """
    try:
        fmt = ExternalFormat(fmt)
    except ValueError:
        raise UnsupportedFormat(str(fmt)) from None
    if fmt is ExternalFormat.NEWSCLIPPINGS:
        return _import_pairs(path, Label.OOC, fmt.value, corpus)
    if fmt is ExternalFormat.MEIR:
        return _import_pairs(path, Label.NEI, fmt.value, corpus)
    return _import_cosmos(path)
