"""Binary evaluation protocol: binarize, score, and render report tables.

Benchmarks carry exactly one caption per item; three-class detector
outputs collapse to the binary task (OOC and NEI both count as
Falsified). Specificity is the hit rate on Truthful items, Sensitivity
the hit rate on Falsified items.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

from .engine import Label
from .errors import (
    DuplicatePrediction,
    EmptyClass,
    IoFailure,
    MalformedRecord,
    MissingPrediction,
    UnknownId,
    UnknownLabel,
)

ItemId = Union[int, str]


class BinaryLabel(str, Enum):
    TRUTHFUL = "truthful"
    FALSIFIED = "falsified"


_BINARIZE = {
    Label.TRUTHFUL.value: BinaryLabel.TRUTHFUL,
    Label.OOC.value: BinaryLabel.FALSIFIED,
    Label.NEI.value: BinaryLabel.FALSIFIED,
    BinaryLabel.FALSIFIED.value: BinaryLabel.FALSIFIED,
}


def binarize(pred_label: Union[str, Label, BinaryLabel]) -> BinaryLabel:
    """Collapse a three-class label onto the binary task."""
    key = pred_label.value if isinstance(pred_label, Enum) else str(pred_label)
    try:
        return _BINARIZE[key]
    except KeyError:
        raise UnknownLabel(key) from None


@dataclass(frozen=True)
class EvalItem:
    id: ItemId
    image_id: ItemId
    caption: str
    true_label: BinaryLabel


@dataclass(frozen=True)
class Prediction:
    id: ItemId
    pred_label: str
    scores: tuple[float, ...] | None = None


@dataclass(frozen=True)
class EvalReport:
    """Metrics plus, when scored from raw predictions, the confusion counts.

    Reports built from published rates carry no counts; the metric
    identities are enforced wherever counts exist.
    """

    accuracy: float
    specificity: float
    sensitivity: float
    strategy: str = ""
    modality: str = "multimodal"
    n: int | None = None
    tt: int | None = None
    tf: int | None = None
    ft: int | None = None
    ff: int | None = None

    @classmethod
    def from_counts(
        cls, tt: int, tf: int, ft: int, ff: int, strategy: str = "", modality: str = "multimodal"
    ) -> "EvalReport":
        truthful = tt + tf
        falsified = ff + ft
        if truthful == 0:
            raise EmptyClass("truthful")
        if falsified == 0:
            raise EmptyClass("falsified")
        n = truthful + falsified
        return cls(
            accuracy=(tt + ff) / n,
            specificity=tt / truthful,
            sensitivity=ff / falsified,
            strategy=strategy,
            modality=modality,
            n=n,
            tt=tt,
            tf=tf,
            ft=ft,
            ff=ff,
        )

    @classmethod
    def from_rates(
        cls,
        accuracy: float,
        specificity: float,
        sensitivity: float,
        strategy: str = "",
        modality: str = "multimodal",
    ) -> "EvalReport":
        for value in (accuracy, specificity, sensitivity):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"rate {value} outside [0, 1]")
        return cls(
            accuracy=accuracy, specificity=specificity, sensitivity=sensitivity, strategy=strategy, modality=modality
        )


def score(
    benchmark: Sequence[EvalItem],
    predictions: Sequence[Prediction],
    strategy: str = "",
    modality: str = "multimodal",
) -> EvalReport:
    """Confusion counts and rates over a fully covered benchmark.

    Every benchmark id must be predicted exactly once; extra or missing
    ids are hard errors, never silently scored.
    """
    by_id: dict[ItemId, Prediction] = {}
    for pred in predictions:
        if pred.id in by_id:
            raise DuplicatePrediction(pred.id)
        by_id[pred.id] = pred
    wanted = {item.id for item in benchmark}
    missing = sorted((i for i in wanted if i not in by_id), key=str)
    if missing:
        raise MissingPrediction(missing)
    for pid in by_id:
        if pid not in wanted:
            raise UnknownId(pid, "benchmark")

    tt = tf = ft = ff = 0
    for item in benchmark:
        predicted = binarize(by_id[item.id].pred_label)
        if item.true_label is BinaryLabel.TRUTHFUL:
            if predicted is BinaryLabel.TRUTHFUL:
                tt += 1
            else:
                tf += 1
        else:
            if predicted is BinaryLabel.FALSIFIED:
                ff += 1
            else:
                ft += 1
    return EvalReport.from_counts(tt, tf, ft, ff, strategy=strategy, modality=modality)


# Strategy tags that manipulate entities rather than swapping a modality.
_NEI_TAGS = {"r-nest", "clip-nest-c", "clip-nest-i", "clip-nest-alt", "meir"}


def _type_of(strategy: str) -> str:
    tag = strategy.lower()
    if "+" in tag:
        return "OOC + NEI"
    if tag in _NEI_TAGS:
        return "NEI"
    return "OOC"


def _pct(value: float, digits: int) -> str:
    return f"{value * 100:.{digits}f}"


def _table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines)


def render_report(reports: Sequence[EvalReport], layout: str = "table2") -> str:
    """Aligned plain-text table of one or more reports.

    table2: Accuracy / Truthful / Falsified at two decimals.
    table3: one row per strategy with per-modality accuracy at one
    decimal; Truthful/Falsified hit rates come from the multimodal run.
    """
    if not reports:
        raise ValueError("no reports to render")
    if layout == "table2":
        rows = [
            [r.strategy or "-", f"{_pct(r.accuracy, 2)} / {_pct(r.specificity, 2)} / {_pct(r.sensitivity, 2)}"]
            for r in reports
        ]
        return _table(["Strategy", "Accuracy / Truthful / Falsified"], rows)
    if layout == "table3":
        order: list[str] = []
        grouped: dict[str, dict[str, EvalReport]] = {}
        for r in reports:
            if r.strategy not in grouped:
                grouped[r.strategy] = {}
                order.append(r.strategy)
            grouped[r.strategy][r.modality] = r
        rows = []
        for tag in order:
            mods = grouped[tag]
            multi = mods.get("multimodal")
            cells = [_type_of(tag), tag or "-"]
            for modality in ("image-only", "text-only", "multimodal"):
                r = mods.get(modality)
                cells.append(_pct(r.accuracy, 1) if r else "-")
            cells.append(_pct(multi.specificity, 1) if multi else "-")
            cells.append(_pct(multi.sensitivity, 1) if multi else "-")
            rows.append(cells)
        headers = ["Type", "Strategy", "Image-only", "Text-only", "Multimodal", "Truthful", "Falsified"]
        return _table(headers, rows)
    raise ValueError(f"unknown layout {layout!r}")


def _require(obj: Mapping, key: str, lineno: int):
    if key not in obj:
        raise MalformedRecord(lineno, f"missing field {key!r}")
    return obj[key]


def _read_jsonl(path: str | Path) -> Iterable[tuple[int, dict]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(path), str(exc)) from None
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


def load_benchmark(path: str | Path) -> list[EvalItem]:
    items = []
    seen: set[ItemId] = set()
    for lineno, obj in _read_jsonl(path):
        item_id = _require(obj, "id", lineno)
        if item_id in seen:
            raise MalformedRecord(lineno, f"duplicate item id {item_id!r}")
        seen.add(item_id)
        raw = str(_require(obj, "true_label", lineno))
        try:
            true_label = binarize(raw)
        except UnknownLabel:
            raise MalformedRecord(lineno, f"unknown label {raw!r}") from None
        items.append(
            EvalItem(
                id=item_id,
                image_id=_require(obj, "image_id", lineno),
                caption=str(_require(obj, "caption", lineno)),
                true_label=true_label,
            )
        )
    return items


def save_benchmark(items: Sequence[EvalItem], path: str | Path) -> None:
    lines = []
    for item in items:
        obj = {"id": item.id, "image_id": item.image_id, "caption": item.caption, "true_label": item.true_label.value}
        lines.append(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def load_predictions(path: str | Path) -> list[Prediction]:
    preds = []
    for lineno, obj in _read_jsonl(path):
        scores = obj.get("scores")
        if scores is not None:
            scores = tuple(float(s) for s in scores)
        preds.append(
            Prediction(
                id=_require(obj, "id", lineno),
                pred_label=str(_require(obj, "pred_label", lineno)),
                scores=scores,
            )
        )
    return preds


def save_predictions(preds: Sequence[Prediction], path: str | Path) -> None:
    lines = []
    for pred in preds:
        obj: dict = {"id": pred.id, "pred_label": pred.pred_label}
        if pred.scores is not None:
            obj["scores"] = list(pred.scores)
        lines.append(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def report_to_json(report: EvalReport) -> str:
    obj = {
        "strategy": report.strategy,
        "modality": report.modality,
        "accuracy": report.accuracy,
        "specificity": report.specificity,
        "sensitivity": report.sensitivity,
        "n": report.n,
        "tt": report.tt,
        "tf": report.tf,
        "ft": report.ft,
        "ff": report.ff,
    }
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def load_reports(path: str | Path) -> list[EvalReport]:
    reports = []
    for lineno, obj in _read_jsonl(path):
        try:
            reports.append(
                EvalReport(
                    accuracy=float(_require(obj, "accuracy", lineno)),
                    specificity=float(_require(obj, "specificity", lineno)),
                    sensitivity=float(_require(obj, "sensitivity", lineno)),
                    strategy=str(obj.get("strategy", "")),
                    modality=str(obj.get("modality", "multimodal")),
                    n=obj.get("n"),
                    tt=obj.get("tt"),
                    tf=obj.get("tf"),
                    ft=obj.get("ft"),
                    ff=obj.get("ff"),
                )
            )
        except (TypeError, ValueError) as exc:
            raise MalformedRecord(lineno, str(exc)) from None
    return reports


def save_reports(reports: Sequence[EvalReport], path: str | Path) -> None:
    Path(path).write_text("".join(report_to_json(r) + "\n" for r in reports), encoding="utf-8")
