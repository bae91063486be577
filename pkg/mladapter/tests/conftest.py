"""Shared builders for the adapter tests."""

from __future__ import annotations

import numpy as np
import pytest

from mmd_adapter import CorpusRecord

PEOPLE = ["Alice Reed", "Bob Stone", "Carol Finch", "Dan Wolfe", "Eve Marsh", "Frank Ode"]
ORGS = ["Acme Labs", "Orbit Press", "Nine Rivers", "Blue Canton"]
PLACES = ["Berlin", "Lagos", "Quito", "Hanoi", "Tbilisi", "Oslo"]

# Vocabulary for the heuristic tagger; surfaces above map to these types.
VOCAB = {name: "PERSON" for name in PEOPLE}
VOCAB.update({name: "ORG" for name in ORGS})
VOCAB.update({name: "GPE" for name in PLACES})


def make_corpus(n: int, n_topics: int = 3, split: str = "train") -> list[CorpusRecord]:
    """Corpus whose captions carry person, org and place mentions."""
    records = []
    for i in range(n):
        person = PEOPLE[i % len(PEOPLE)]
        org = ORGS[(i // 2) % len(ORGS)]
        place = PLACES[(i // 3) % len(PLACES)]
        records.append(
            CorpusRecord(
                id=i,
                image_ref=f"images/{i:05d}.jpg",
                caption=f"{person} of {org} spoke in {place} on day {i}.",
                topic=f"topic-{i % n_topics}",
                source="unit",
                split=split,
            )
        )
    return records


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
