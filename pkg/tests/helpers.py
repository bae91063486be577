"""Synthetic fixture builders shared across the test suite.

Captions are assembled from disjoint vocabularies so entity offsets can
be computed by simple string search without collisions.
"""

from __future__ import annotations

import numpy as np

from misinfo_forge import (
    AnnotatedCaption,
    Corpus,
    EntitySpan,
    EntityType,
    NewsRecord,
    Split,
)

PEOPLE = ["Alice Reed", "Bob Stone", "Carol Juarez", "Dan Wu", "Eve Moran", "Frank Abe"]
ORGS = ["Acme Corp", "Globex", "Initech", "Umbrella Group"]
PLACES = ["Paris", "Berlin", "Oslo", "Cairo", "Lima", "Quito"]

_SPLIT_CYCLE = [Split.TRAIN] * 8 + [Split.VAL, Split.TEST]


def entity_caption(person: str, org: str, place: str, idx: int) -> tuple[str, tuple[EntitySpan, ...]]:
    caption = f"{person} of {org} spoke in {place} on day {idx}."
    spans = []
    for etype, surface in ((EntityType.PERSON, person), (EntityType.ORG, org), (EntityType.GPE, place)):
        start = caption.index(surface)
        spans.append(EntitySpan(etype=etype, start=start, end=start + len(surface), surface=surface))
    spans.sort(key=lambda s: s.start)
    return caption, tuple(spans)


def make_corpus(
    n: int,
    n_topics: int = 5,
    seed: int = 0,
    entity_prob: float = 1.0,
    split: Split | None = Split.TRAIN,
) -> tuple[Corpus, dict[int, AnnotatedCaption]]:
    """Corpus of n records plus aligned annotations.

    entity_prob < 1 leaves some captions entity-free (their annotation is
    an empty span tuple). split=None cycles train/val/test.
    """
    rng = np.random.default_rng(seed)
    records = []
    annotations = {}
    for i in range(n):
        person = PEOPLE[int(rng.integers(len(PEOPLE)))]
        org = ORGS[int(rng.integers(len(ORGS)))]
        place = PLACES[int(rng.integers(len(PLACES)))]
        if float(rng.random()) < entity_prob:
            caption, spans = entity_caption(person, org, place, i)
        else:
            caption, spans = f"an unremarkable scene numbered {i}.", ()
        records.append(
            NewsRecord(
                id=i,
                image_ref=f"img/{i}.jpg",
                caption=caption,
                topic=f"topic-{i % n_topics}",
                source="synthetic",
                split=split if split is not None else _SPLIT_CYCLE[i % len(_SPLIT_CYCLE)],
            )
        )
        annotations[i] = AnnotatedCaption(record_id=i, entities=spans)
    return Corpus(records), annotations


def brute_force_nearest(query_vec, candidate_ids, candidate_vecs, admissible, rank=0):
    """Independent oracle: sort by (cosine desc, id asc) over admissible ids.

    Uses plain python sorting over float64 dot products, no shared code
    with the library's ranking kernel.
    """
    scored = []
    for cid, vec in zip(candidate_ids, candidate_vecs):
        if not admissible(int(cid)):
            continue
        score = float(np.dot(np.asarray(query_vec, dtype=np.float64), np.asarray(vec, dtype=np.float64)))
        scored.append((-score, int(cid)))
    scored.sort()
    if rank >= len(scored):
        return None
    return scored[rank][1]
