"""News records, entity annotations, and their newline-delimited JSON files.

A corpus file holds one JSON object per line with the fields of
:class:`NewsRecord`. An annotation file holds one JSON object per line with
a ``record_id`` and a list of entity spans. Offsets are counted in Unicode
code points (Python string indices), never bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import (
    DuplicateId,
    MalformedRecord,
    MissingField,
    SpanMismatch,
    UnknownRecord,
)

_MAX_U64 = (1 << 64) - 1


class Split(str, Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


class EntityType(str, Enum):
    """Closed set of entity types eligible for swapping."""

    PERSON = "PERSON"
    GPE = "GPE"
    LOC = "LOC"
    ORG = "ORG"
    DATE = "DATE"
    TIME = "TIME"
    EVENT = "EVENT"
    NORP = "NORP"
    FAC = "FAC"


@dataclass(frozen=True)
class NewsRecord:
    """One truthful image-caption pair."""

    id: int
    image_ref: str
    caption: str
    topic: str
    source: str
    split: Split


@dataclass(frozen=True)
class EntitySpan:
    """A typed entity occurrence inside a caption.

    ``start``/``end`` are Unicode code point offsets and ``surface`` must
    equal the caption slice they address.
    """

    etype: EntityType
    start: int
    end: int
    surface: str

    def __post_init__(self):
        if self.start < 0 or self.start >= self.end:
            raise ValueError(f"invalid span offsets [{self.start}, {self.end})")


@dataclass(frozen=True)
class AnnotatedCaption:
    """Entity spans of one caption, sorted by start offset, non-overlapping."""

    record_id: int
    entities: tuple[EntitySpan, ...] = field(default_factory=tuple)


class Corpus:
    """Immutable, id-indexed collection of news records.

    Iteration follows insertion (file) order; lookups go through the id map.
    """

    def __init__(self, records: Iterable[NewsRecord]):
        self._records: list[NewsRecord] = []
        self._by_id: dict[int, NewsRecord] = {}
        for rec in records:
            if rec.id in self._by_id:
                raise DuplicateId(rec.id)
            self._by_id[rec.id] = rec
            self._records.append(rec)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[NewsRecord]:
        return iter(self._records)

    def __contains__(self, record_id: int) -> bool:
        return record_id in self._by_id

    def get(self, record_id: int) -> NewsRecord:
        try:
            return self._by_id[record_id]
        except KeyError:
            raise UnknownRecord(record_id) from None

    def ids(self) -> list[int]:
        return [rec.id for rec in self._records]

    def topics(self) -> list[str]:
        return sorted({rec.topic for rec in self._records})

    def filter_split(self, split: Split) -> "Corpus":
        return Corpus(rec for rec in self._records if rec.split is split)


def _require(obj: dict, name: str, line: int):
    if name not in obj:
        raise MissingField(name, line)
    return obj[name]


def _parse_record(obj: dict, line: int) -> NewsRecord:
    rec_id = _require(obj, "id", line)
    if not isinstance(rec_id, int) or isinstance(rec_id, bool) or not (0 <= rec_id <= _MAX_U64):
        raise MalformedRecord(line, f"id must be an unsigned 64-bit integer, got {rec_id!r}")
    caption = _require(obj, "caption", line)
    if not isinstance(caption, str) or not caption.strip():
        raise MalformedRecord(line, "caption must be non-empty text")
    topic = _require(obj, "topic", line)
    if not isinstance(topic, str) or not topic:
        raise MalformedRecord(line, "topic must be a non-empty string")
    split_raw = _require(obj, "split", line)
    try:
        split = Split(split_raw)
    except ValueError:
        raise MalformedRecord(line, f"split must be one of train/val/test, got {split_raw!r}") from None
    return NewsRecord(
        id=rec_id,
        image_ref=str(_require(obj, "image_ref", line)),
        caption=caption,
        topic=topic,
        source=str(_require(obj, "source", line)),
        split=split,
    )


def load_corpus(path: str | Path) -> Corpus:
    """Load and validate a newline-delimited corpus file.

    Rejects malformed lines, duplicate ids, and empty captions, reporting
    the offending line number.
    """
    records: list[NewsRecord] = []
    seen: set[int] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, f"invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise MalformedRecord(line_no, "record must be a JSON object")
            rec = _parse_record(obj, line_no)
            if rec.id in seen:
                raise DuplicateId(rec.id, line_no)
            seen.add(rec.id)
            records.append(rec)
    return Corpus(records)


def record_to_json(rec: NewsRecord) -> str:
    """Canonical one-line serialization; stable field order, no padding."""
    return json.dumps(
        {
            "id": rec.id,
            "image_ref": rec.image_ref,
            "caption": rec.caption,
            "topic": rec.topic,
            "source": rec.source,
            "split": rec.split.value,
        },
        ensure_ascii=False,
        separators=(",", ":"),
    )


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in corpus:
            fh.write(record_to_json(rec))
            fh.write("\n")


# --- annotations -----------------------------------------------------------------


def _parse_span(obj: dict, record_id: int, line: int) -> EntitySpan:
    for name in ("etype", "start", "end", "surface"):
        if name not in obj:
            raise MissingField(name, line)
    try:
        etype = EntityType(obj["etype"])
    except ValueError:
        raise MalformedRecord(line, f"unknown entity type {obj['etype']!r}") from None
    try:
        return EntitySpan(etype=etype, start=obj["start"], end=obj["end"], surface=obj["surface"])
    except (TypeError, ValueError) as exc:
        raise MalformedRecord(line, f"bad span for record {record_id}: {exc}") from None


def validate_spans(record_id: int, caption: str, spans: Iterable[EntitySpan]) -> tuple[EntitySpan, ...]:
    """Check ordering, disjointness, and slice equality of entity spans."""
    spans = tuple(spans)
    prev_end = -1
    for span in spans:
        if span.start < prev_end:
            raise SpanMismatch(record_id, span, "spans overlap or are out of order")
        if span.end > len(caption):
            raise SpanMismatch(record_id, span, "span exceeds caption length")
        if caption[span.start:span.end] != span.surface:
            raise SpanMismatch(
                record_id,
                span,
                f"caption slice {caption[span.start:span.end]!r} != surface {span.surface!r}",
            )
        prev_end = span.end
    return spans


def load_annotations(path: str | Path, corpus: Corpus) -> dict[int, AnnotatedCaption]:
    """Load entity annotations and validate every span against its caption.

    Every corpus record gets an entry; records absent from the file carry an
    empty entity list.
    """
    annotations: dict[int, AnnotatedCaption] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, f"invalid JSON ({exc.msg})") from None
            record_id = _require(obj, "record_id", line_no)
            if record_id not in corpus:
                raise UnknownRecord(record_id)
            if record_id in annotations:
                raise DuplicateId(record_id, line_no)
            caption = corpus.get(record_id).caption
            spans = sorted(
                (_parse_span(s, record_id, line_no) for s in obj.get("entities", [])),
                key=lambda s: s.start,
            )
            annotations[record_id] = AnnotatedCaption(
                record_id=record_id,
                entities=validate_spans(record_id, caption, spans),
            )
    for rec in corpus:
        if rec.id not in annotations:
            annotations[rec.id] = AnnotatedCaption(record_id=rec.id)
    return annotations


def save_annotations(annotations: Mapping[int, AnnotatedCaption], path: str | Path) -> None:
    """Write annotations for records that carry at least one span."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record_id in sorted(annotations):
            ann = annotations[record_id]
            if not ann.entities:
                continue
            fh.write(
                json.dumps(
                    {
                        "record_id": ann.record_id,
                        "entities": [
                            {
                                "etype": s.etype.value,
                                "start": s.start,
                                "end": s.end,
                                "surface": s.surface,
                            }
                            for s in ann.entities
                        ],
                    },
                    ensure_ascii=False,
                    separators=(",", ":"),
                )
            )
            fh.write("\n")
