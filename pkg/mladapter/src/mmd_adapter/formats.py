"""Self-contained readers and writers for the dataset-engine file formats.

This package talks to the dataset tooling exclusively through its files:
corpus, annotation, dataset, benchmark and prediction JSONL, plus the
binary embedding store. The implementations here are independent so the
adapter can be deployed without the engine installed; byte-level
compatibility is covered by the interop tests.

All JSONL is UTF-8, one compact object per line. Embedding stores are
little-endian: a fixed header, ``count`` u64 row ids in ascending order,
then ``count`` rows of ``dim`` float32 values, each row unit-norm.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import BadStore, MalformedLine

STORE_MAGIC = b"MFEB"
STORE_VERSION = 1
_STORE_HEADER = struct.Struct("<4sHBIQ")
_MODALITY_BYTE = {"image": 0, "text": 1}
_MODALITY_NAME = {v: k for k, v in _MODALITY_BYTE.items()}

BINARY_LABELS = ("truthful", "falsified")
TERNARY_LABELS = ("truthful", "ooc", "nei")


@dataclass(frozen=True)
class CorpusRecord:
    id: int
    image_ref: str
    caption: str
    topic: str
    source: str
    split: str


@dataclass(frozen=True)
class EntitySpanRec:
    """One tagged span; offsets are Unicode code points into the caption."""

    etype: str
    start: int
    end: int
    surface: str


@dataclass(frozen=True)
class DatasetRow:
    image_id: int
    caption: str
    label: str
    provenance: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BenchmarkItem:
    id: object
    image_id: int
    caption: str
    true_label: str


def _read_lines(path: str | Path) -> Iterable[tuple[int, dict]]:
    text = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedLine(line_no, f"invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise MalformedLine(line_no, "expected an object")
        yield line_no, obj


def _need(obj: dict, key: str, line_no: int):
    try:
        return obj[key]
    except KeyError:
        raise MalformedLine(line_no, f"missing field {key!r}") from None


def read_corpus(path: str | Path) -> list[CorpusRecord]:
    records = []
    seen = set()
    for line_no, obj in _read_lines(path):
        rec = CorpusRecord(
            id=int(_need(obj, "id", line_no)),
            image_ref=str(_need(obj, "image_ref", line_no)),
            caption=str(_need(obj, "caption", line_no)),
            topic=str(_need(obj, "topic", line_no)),
            source=str(obj.get("source", "")),
            split=str(_need(obj, "split", line_no)),
        )
        if rec.id in seen:
            raise MalformedLine(line_no, f"duplicate record id {rec.id}")
        seen.add(rec.id)
        records.append(rec)
    return records


def write_corpus(records: Sequence[CorpusRecord], path: str | Path) -> None:
    lines = []
    for rec in records:
        obj = {
            "id": rec.id,
            "image_ref": rec.image_ref,
            "caption": rec.caption,
            "topic": rec.topic,
            "source": rec.source,
            "split": rec.split,
        }
        lines.append(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_annotations(path: str | Path) -> dict[int, list[EntitySpanRec]]:
    out: dict[int, list[EntitySpanRec]] = {}
    for line_no, obj in _read_lines(path):
        rid = int(_need(obj, "record_id", line_no))
        if rid in out:
            raise MalformedLine(line_no, f"duplicate record id {rid}")
        spans = []
        for raw in obj.get("entities", []):
            spans.append(
                EntitySpanRec(
                    etype=str(_need(raw, "etype", line_no)),
                    start=int(_need(raw, "start", line_no)),
                    end=int(_need(raw, "end", line_no)),
                    surface=str(_need(raw, "surface", line_no)),
                )
            )
        out[rid] = spans
    return out


def write_annotations(annotations: Mapping[int, Sequence[EntitySpanRec]], path: str | Path) -> None:
    """Write the entity file: only records with spans, sorted by record id."""
    lines = []
    for rid in sorted(annotations):
        spans = annotations[rid]
        if not spans:
            continue
        obj = {
            "record_id": rid,
            "entities": [
                {"etype": s.etype, "start": s.start, "end": s.end, "surface": s.surface}
                for s in spans
            ],
        }
        lines.append(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_dataset(path: str | Path) -> list[DatasetRow]:
    rows = []
    for line_no, obj in _read_lines(path):
        prov = obj.get("provenance") or {}
        if not isinstance(prov, dict):
            raise MalformedLine(line_no, "provenance must be an object")
        rows.append(
            DatasetRow(
                image_id=int(_need(obj, "image_id", line_no)),
                caption=str(_need(obj, "caption", line_no)),
                label=str(_need(obj, "label", line_no)),
                provenance=prov,
            )
        )
    return rows


def read_benchmark(path: str | Path) -> list[BenchmarkItem]:
    items = []
    seen = set()
    for line_no, obj in _read_lines(path):
        item = BenchmarkItem(
            id=_need(obj, "id", line_no),
            image_id=int(_need(obj, "image_id", line_no)),
            caption=str(_need(obj, "caption", line_no)),
            true_label=str(_need(obj, "true_label", line_no)),
        )
        key = str(item.id)
        if key in seen:
            raise MalformedLine(line_no, f"duplicate id {item.id!r}")
        seen.add(key)
        items.append(item)
    return items


def write_benchmark(items: Sequence[BenchmarkItem], path: str | Path) -> None:
    lines = []
    for item in items:
        obj = {
            "id": item.id,
            "image_id": item.image_id,
            "caption": item.caption,
            "true_label": item.true_label,
        }
        lines.append(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_predictions(rows: Sequence[tuple[object, str, Sequence[float] | None]], path: str | Path) -> None:
    """Write prediction JSONL; each row is (id, pred_label, scores or None)."""
    lines = []
    for pid, label, scores in rows:
        obj: dict = {"id": pid, "pred_label": label}
        if scores is not None:
            obj["scores"] = [float(s) for s in scores]
        lines.append(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_predictions(path: str | Path) -> list[tuple[object, str, list[float] | None]]:
    rows = []
    for line_no, obj in _read_lines(path):
        scores = obj.get("scores")
        if scores is not None:
            scores = [float(s) for s in scores]
        rows.append((_need(obj, "id", line_no), str(_need(obj, "pred_label", line_no)), scores))
    return rows


def read_store(path: str | Path) -> tuple[str, np.ndarray, np.ndarray]:
    """Load an embedding store.

    Returns (modality, ids, matrix) with ids uint64 ascending and matrix
    float32 of shape (count, dim).
    """
    raw = Path(path).read_bytes()
    if len(raw) < _STORE_HEADER.size:
        raise BadStore(path, "file too short for header")
    magic, version, modality_byte, dim, count = _STORE_HEADER.unpack_from(raw)
    if magic != STORE_MAGIC:
        raise BadStore(path, f"bad magic {magic!r}")
    if version != STORE_VERSION:
        raise BadStore(path, f"unsupported version {version}")
    if modality_byte not in _MODALITY_NAME:
        raise BadStore(path, f"unknown modality byte {modality_byte}")
    if dim == 0:
        raise BadStore(path, "zero dimension")
    expected = _STORE_HEADER.size + count * 8 + count * dim * 4
    if len(raw) != expected:
        raise BadStore(path, f"expected {expected} bytes, found {len(raw)}")
    offset = _STORE_HEADER.size
    ids = np.frombuffer(raw, dtype="<u8", count=count, offset=offset)
    offset += count * 8
    matrix = np.frombuffer(raw, dtype="<f4", count=count * dim, offset=offset)
    matrix = matrix.reshape(count, dim)
    if count > 1 and not np.all(ids[1:] > ids[:-1]):
        raise BadStore(path, "row ids are not strictly ascending")
    return _MODALITY_NAME[modality_byte], ids.copy(), matrix.copy()


def write_store(modality: str, ids: Sequence[int], matrix: np.ndarray, path: str | Path) -> None:
    """Write an embedding store; rows are sorted by id and unit-normalized."""
    if modality not in _MODALITY_BYTE:
        raise ValueError(f"modality must be one of {sorted(_MODALITY_BYTE)}")
    arr = np.asarray(matrix, dtype=np.float32)
    id_arr = np.asarray(list(ids), dtype=np.uint64)
    if arr.ndim != 2 or arr.shape[0] != id_arr.shape[0]:
        raise ValueError("matrix rows must match the number of ids")
    if len(set(id_arr.tolist())) != len(id_arr):
        raise ValueError("duplicate ids")
    if not np.isfinite(arr).all():
        raise ValueError("embeddings must be finite")
    norms = np.linalg.norm(arr.astype(np.float64), axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm embedding row")
    arr = (arr.astype(np.float64) / norms[:, None]).astype(np.float32)
    order = np.argsort(id_arr, kind="stable")
    id_arr = id_arr[order]
    arr = np.ascontiguousarray(arr[order])
    header = _STORE_HEADER.pack(
        STORE_MAGIC, STORE_VERSION, _MODALITY_BYTE[modality], arr.shape[1], arr.shape[0]
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(id_arr.astype("<u8").tobytes())
        fh.write(arr.astype("<f4").tobytes())


def store_lookup(ids: np.ndarray, matrix: np.ndarray, wanted: Sequence[int]) -> np.ndarray:
    """Gather rows for ``wanted`` ids, preserving the requested order."""
    index = {int(i): n for n, i in enumerate(ids.tolist())}
    rows = np.empty((len(wanted), matrix.shape[1]), dtype=matrix.dtype)
    for n, rid in enumerate(wanted):
        try:
            rows[n] = matrix[index[int(rid)]]
        except KeyError:
            raise KeyError(f"id {rid} not present in store") from None
    return rows
