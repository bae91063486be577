"""Typed named-entity substitution: pooled random swaps and pairwise swaps.

Both swap flavors produce a falsified caption from a truthful one by
replacing entity surfaces with same-type substitutes, leaving every
character outside the replaced spans untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InadmissiblePair, NoAdmissibleReplacement, OverlappingSpans
from .records import AnnotatedCaption, Corpus, EntitySpan, EntityType, NewsRecord


@dataclass(frozen=True)
class PoolEntry:
    surface: str
    source_id: int


@dataclass(frozen=True)
class Replacement:
    span: EntitySpan
    old_surface: str
    new_surface: str
    new_source_id: int | None


@dataclass(frozen=True)
class SwapResult:
    falsified_caption: str
    replacements: tuple[Replacement, ...]


class EntityPool:
    """Multiset of entity surfaces per (topic, type), duplicates retained.

    Duplicates matter: sampling is uniform over entries, so frequent
    surfaces are drawn proportionally more often.
    """

    def __init__(self):
        self._entries: dict[tuple[str, EntityType], list[PoolEntry]] = {}

    def add(self, topic: str, etype: EntityType, surface: str, source_id: int) -> None:
        self._entries.setdefault((topic, etype), []).append(PoolEntry(surface, source_id))

    def entries(self, topic: str, etype: EntityType) -> Sequence[PoolEntry]:
        return self._entries.get((topic, etype), ())

    def admissible(self, topic: str, etype: EntityType, own_surface: str) -> list[PoolEntry]:
        return [e for e in self.entries(topic, etype) if e.surface != own_surface]

    def size(self, topic: str, etype: EntityType) -> int:
        return len(self.entries(topic, etype))

    def keys(self) -> Iterable[tuple[str, EntityType]]:
        return self._entries.keys()


def build_entity_pool(corpus: Corpus, annotations: Mapping[int, AnnotatedCaption]) -> EntityPool:
    """Collect every annotated surface into its (topic, type) pool.

    Records are scanned in ascending id order so the pool layout does not
    depend on corpus file order.
    """
    pool = EntityPool()
    for rec in sorted(corpus, key=lambda r: r.id):
        ann = annotations.get(rec.id)
        if ann is None:
            continue
        for span in ann.entities:
            pool.add(rec.topic, span.etype, span.surface, rec.id)
    return pool


def apply_replacements(caption: str, replacements: Sequence[Replacement]) -> str:
    """Splice replacement surfaces into the caption, right to left.

    Right-to-left order keeps earlier span offsets valid while later ones
    are already rewritten. Offsets are Unicode scalar positions.
    """
    prev_start = None
    for rep in reversed(sorted(replacements, key=lambda r: r.span.start)):
        span = rep.span
        if span.end > len(caption):
            raise OverlappingSpans(f"span {span.start}..{span.end} beyond caption length {len(caption)}")
        if prev_start is not None and span.end > prev_start:
            raise OverlappingSpans(f"span ending at {span.end} overlaps span starting at {prev_start}")
        caption = caption[: span.start] + rep.new_surface + caption[span.end :]
        prev_start = span.start
    return caption


def random_swap(
    record: NewsRecord,
    annotation: AnnotatedCaption,
    pool: EntityPool,
    seed: int,
) -> SwapResult:
    """Replace each entity with a uniform draw from its (topic, type) pool.

    Draws exclude the span's own surface form, so every replacement is a
    visible change. Spans with no admissible substitute stay as they are;
    if that is all of them the record cannot be falsified this way.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    replacements = []
    for span in annotation.entities:
        candidates = pool.admissible(record.topic, span.etype, span.surface)
        if not candidates:
            continue
        pick = candidates[int(rng.integers(len(candidates)))]
        replacements.append(Replacement(span, span.surface, pick.surface, pick.source_id))
    if not replacements:
        raise NoAdmissibleReplacement(record.id)
    falsified = apply_replacements(record.caption, replacements)
    if falsified == record.caption:
        # Shifted span boundaries can, rarely, reassemble the original text.
        raise NoAdmissibleReplacement(record.id)
    return SwapResult(falsified_caption=falsified, replacements=tuple(replacements))


def pairwise_swap(
    record_a: NewsRecord,
    annotation_a: AnnotatedCaption,
    record_x: NewsRecord,
    annotation_x: AnnotatedCaption,
) -> SwapResult:
    """Swap same-type entities of record_a for those of record_x.

    For each type present in both captions, the i-th span of that type in
    C_a (document order) takes the (i mod m)-th surface of C_x, where m is
    how many spans of the type C_x holds. Types C_x lacks stay unchanged.
    The pair is inadmissible when the captions share no entity type, or
    when every positional substitute is the identical surface.
    """
    donors: dict[EntityType, list[str]] = {}
    for span in annotation_x.entities:
        donors.setdefault(span.etype, []).append(span.surface)

    replacements = []
    counters: dict[EntityType, int] = {}
    for span in annotation_a.entities:
        surfaces = donors.get(span.etype)
        if not surfaces:
            continue
        i = counters.get(span.etype, 0)
        counters[span.etype] = i + 1
        new_surface = surfaces[i % len(surfaces)]
        replacements.append(Replacement(span, span.surface, new_surface, record_x.id))

    if not replacements:
        raise InadmissiblePair(record_a.id, record_x.id, "no shared entity type")
    if all(rep.new_surface == rep.old_surface for rep in replacements):
        raise InadmissiblePair(record_a.id, record_x.id, "all shared surfaces identical")

    falsified = apply_replacements(record_a.caption, replacements)
    if falsified == record_a.caption:
        raise InadmissiblePair(record_a.id, record_x.id, "swap reassembled the original caption")
    return SwapResult(falsified_caption=falsified, replacements=tuple(replacements))
