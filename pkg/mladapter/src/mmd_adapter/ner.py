"""Entity tagging that emits the swap engine's annotation format.

The tagger labels captions with OntoNotes-style entity types and keeps
only the types the swap engine accepts, via the mapping table below.
Spans are recorded as Unicode code-point offsets and are checked against
the caption slice before writing, so the produced file always validates
downstream.
"""

from __future__ import annotations

import re
from typing import Mapping, Protocol, Sequence

from .errors import BadSpan, ModelLoadFailure
from .formats import CorpusRecord, EntitySpanRec

# Tagger label -> annotation type. Identity for the nine types the swap
# engine models; everything else (CARDINAL, MONEY, ...) is dropped.
LABEL_MAP: dict[str, str | None] = {
    "PERSON": "PERSON",
    "GPE": "GPE",
    "LOC": "LOC",
    "ORG": "ORG",
    "DATE": "DATE",
    "TIME": "TIME",
    "EVENT": "EVENT",
    "NORP": "NORP",
    "FAC": "FAC",
    "CARDINAL": None,
    "MONEY": None,
    "ORDINAL": None,
    "PERCENT": None,
    "QUANTITY": None,
    "LANGUAGE": None,
    "LAW": None,
    "PRODUCT": None,
    "WORK_OF_ART": None,
}

DEFAULT_MODEL = "en_core_web_trf"


class RawSpan(tuple):
    """(label, start, end, surface) as produced by a tagger backend."""

    __slots__ = ()

    def __new__(cls, label: str, start: int, end: int, surface: str):
        return super().__new__(cls, (label, start, end, surface))


class TaggerBackend(Protocol):
    def __call__(self, texts: Sequence[str]) -> list[list[RawSpan]]: ...


def map_label(label: str) -> str | None:
    """Translate a tagger label; returns None for types we drop."""
    return LABEL_MAP.get(label)


class SpacyBackend:
    """Transformer tagger loaded lazily; only the NER component runs."""

    def __init__(self, model: str = DEFAULT_MODEL):
        try:
            import spacy
        except Exception as exc:  # pragma: no cover - depends on env
            raise ModelLoadFailure(model, f"spacy unavailable: {exc}") from None
        try:
            self._nlp = spacy.load(model, enable=["transformer", "ner"])
        except Exception as exc:  # pragma: no cover - needs model package
            raise ModelLoadFailure(model, str(exc)) from None

    def __call__(self, texts: Sequence[str]) -> list[list[RawSpan]]:  # pragma: no cover - needs model
        out = []
        for doc in self._nlp.pipe(list(texts), batch_size=32):
            out.append([RawSpan(e.label_, e.start_char, e.end_char, e.text) for e in doc.ents])
        return out


class HeuristicBackend:
    """Test-double tagger: runs of capitalized words become entities.

    A supplied vocabulary maps known surfaces to types; unknown runs
    default to PERSON. Sentence-initial words are skipped unless they are
    in the vocabulary, which keeps the output from drowning in noise.
    """

    _RUN = re.compile(r"\b[A-Z][A-Za-z]*(?: [A-Z][A-Za-z]*)*\b")

    def __init__(self, vocab: Mapping[str, str] | None = None):
        self.vocab = dict(vocab or {})
        for etype in self.vocab.values():
            if map_label(etype) is None:
                raise ValueError(f"vocabulary uses unsupported type {etype!r}")

    def __call__(self, texts: Sequence[str]) -> list[list[RawSpan]]:
        out = []
        for text in texts:
            spans = []
            for m in self._RUN.finditer(text):
                surface = m.group(0)
                label = self.vocab.get(surface)
                if label is None:
                    if m.start() == 0:
                        continue
                    label = "PERSON"
                spans.append(RawSpan(label, m.start(), m.end(), surface))
            out.append(spans)
        return out


def extract_entities(
    records: Sequence[CorpusRecord], backend: TaggerBackend
) -> dict[int, list[EntitySpanRec]]:
    """Tag every caption and keep only mapped, slice-exact spans.

    Output spans are sorted by start offset and non-overlapping; records
    whose captions contain no kept entity map to an empty list.
    """
    recs = sorted(records, key=lambda r: r.id)
    tagged = backend([r.caption for r in recs])
    if len(tagged) != len(recs):
        raise BadSpan(-1, f"backend returned {len(tagged)} documents for {len(recs)} captions")
    out: dict[int, list[EntitySpanRec]] = {}
    for rec, raw_spans in zip(recs, tagged):
        spans = []
        for label, start, end, surface in raw_spans:
            etype = map_label(label)
            if etype is None:
                continue
            if not (0 <= start < end <= len(rec.caption)):
                raise BadSpan(rec.id, f"span [{start}, {end}) out of bounds")
            if rec.caption[start:end] != surface:
                raise BadSpan(rec.id, f"surface {surface!r} does not match caption slice")
            spans.append(EntitySpanRec(etype=etype, start=start, end=end, surface=surface))
        spans.sort(key=lambda s: s.start)
        for prev, cur in zip(spans, spans[1:]):
            if cur.start < prev.end:
                raise BadSpan(rec.id, "overlapping spans")
        out[rec.id] = spans
    return out
