"""Topic partitioning and exact constrained cosine nearest-neighbor search.

Search is exact brute force within a topic bucket: candidate vectors are
gathered once per (space, topic) into a float64 matrix, each query is one
matrix-vector product, and ranking sorts by (similarity desc, id asc).
Ties therefore always resolve to the lower record id, and any result is
reproducible by independent enumeration.
"""

from __future__ import annotations

import hashlib
import struct
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np

from .embeddings import EmbeddingStore, Modality
from .errors import DimMismatch, NoCandidate, TruncatedFile, UnknownId, UnknownRecord
from .errors import BadMagic
from .records import Corpus

TOPK_MAGIC = b"MFTK"
TOPK_VERSION = 1


class TopicIndex:
    """Partition of record ids into per-topic buckets, ascending by id."""

    def __init__(self, buckets: Mapping[str, np.ndarray]):
        self._buckets = {topic: np.asarray(ids, dtype=np.uint64) for topic, ids in buckets.items()}

    def topics(self) -> list[str]:
        return sorted(self._buckets)

    def bucket(self, topic: str) -> np.ndarray:
        try:
            return self._buckets[topic]
        except KeyError:
            raise KeyError(f"unknown topic {topic!r}") from None

    def sizes(self) -> dict[str, int]:
        return {topic: len(ids) for topic, ids in self._buckets.items()}

    def __len__(self) -> int:
        return len(self._buckets)

    def total(self) -> int:
        return sum(len(ids) for ids in self._buckets.values())


def build_topic_index(corpus: Corpus) -> TopicIndex:
    """Group corpus ids by topic; every id lands in exactly one bucket."""
    grouped: dict[str, list[int]] = {}
    for rec in corpus:
        grouped.setdefault(rec.topic, []).append(rec.id)
    return TopicIndex({topic: np.array(sorted(ids), dtype=np.uint64) for topic, ids in grouped.items()})


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Dot product of two L2-normalized vectors, accumulated in float64."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise DimMismatch(v.shape[-1], u.shape[-1])
    return float(np.dot(u.astype(np.float64), v.astype(np.float64)))


@dataclass(frozen=True)
class CandidateFilter:
    """Admissibility constraints for one query.

    ``exclude_ids`` always contains the query's own id; ``predicate``, when
    set, must accept a candidate record id for it to stay in play.
    """

    exclude_ids: frozenset[int]
    predicate: Callable[[int], bool] | None = None

    @classmethod
    def for_query(
        cls,
        query_id: int,
        exclude: Iterable[int] = (),
        predicate: Callable[[int], bool] | None = None,
    ) -> "CandidateFilter":
        return cls(exclude_ids=frozenset(exclude) | {query_id}, predicate=predicate)


@dataclass
class TopKCache:
    """Persisted raw ranking prefixes, an optimization that never changes results.

    Lists hold the unfiltered top-k of each query (the query itself
    included); filters are applied at query time and a full scan kicks in
    whenever a prefix cannot prove the answer.
    """

    query_space: Modality
    candidate_space: Modality
    k: int
    lists: dict[int, list[int]] = field(default_factory=dict)


def _caption_hash(caption: str) -> int:
    return int.from_bytes(hashlib.blake2b(caption.encode("utf-8"), digest_size=8).digest(), "little")


class SimilarityIndex:
    """Exact in-topic cosine retrieval over one or two embedding stores.

    Immutable after construction apart from internal per-topic matrix
    caches; queries are pure functions and safe to issue from any number of
    threads.
    """

    def __init__(
        self,
        corpus: Corpus,
        topic_index: TopicIndex,
        stores: Mapping[Modality, EmbeddingStore],
        topk_cache: TopKCache | None = None,
    ):
        self._corpus = corpus
        self._topics = topic_index
        self._stores = dict(stores)
        self._cache = topk_cache
        self._buckets: dict[tuple[Modality, str], tuple[np.ndarray, np.ndarray]] = {}
        self._cap_hashes: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def topic_index(self) -> TopicIndex:
        return self._topics

    def store(self, space: Modality) -> EmbeddingStore:
        try:
            return self._stores[space]
        except KeyError:
            raise KeyError(f"no {space.value} store attached") from None

    def _bucket_matrix(self, space: Modality, topic: str) -> tuple[np.ndarray, np.ndarray]:
        key = (space, topic)
        with self._lock:
            cached = self._buckets.get(key)
        if cached is not None:
            return cached
        ids = self._topics.bucket(topic)
        store = self.store(space)
        rows = np.fromiter((store.row_of(int(i)) for i in ids), dtype=np.intp, count=len(ids))
        matrix = store.matrix[rows].astype(np.float64)
        with self._lock:
            self._buckets[key] = (ids, matrix)
        return ids, matrix

    def _topic_caption_hashes(self, topic: str) -> np.ndarray:
        with self._lock:
            cached = self._cap_hashes.get(topic)
        if cached is not None:
            return cached
        ids = self._topics.bucket(topic)
        hashes = np.fromiter(
            (_caption_hash(self._corpus.get(int(i)).caption) for i in ids),
            dtype=np.uint64,
            count=len(ids),
        )
        with self._lock:
            self._cap_hashes[topic] = hashes
        return hashes

    def _admissible_one(
        self,
        candidate_id: int,
        query_id: int,
        query_caption: str | None,
        filt: CandidateFilter | None,
    ) -> bool:
        if candidate_id == query_id:
            return False
        if filt is not None:
            if candidate_id in filt.exclude_ids:
                return False
            if filt.predicate is not None and not filt.predicate(candidate_id):
                return False
        if query_caption is not None and self._corpus.get(candidate_id).caption == query_caption:
            return False
        return True

    def _ranked(
        self,
        query_id: int,
        query_space: Modality,
        candidate_space: Modality,
        filt: CandidateFilter | None,
        needed: int,
    ) -> list[int]:
        """Admissible candidate ids, most similar first.

        Returns at least ``needed`` ids unless the admissible set is
        smaller, in which case the returned list is complete.
        """
        try:
            rec = self._corpus.get(query_id)
        except UnknownRecord:
            raise UnknownId(query_id, "corpus") from None
        query = self.store(query_space).vector(query_id)
        # Text-space queries also reject candidates whose caption is
        # byte-identical to the query's; such a "swap" would not falsify.
        query_caption = rec.caption if query_space is Modality.TEXT else None

        bucket_ids = self._topics.bucket(rec.topic)
        cached = self._cache
        if (
            cached is not None
            and cached.query_space is query_space
            and cached.candidate_space is candidate_space
        ):
            prefix = cached.lists.get(query_id)
            if prefix is not None:
                admissible = [
                    cid for cid in prefix if self._admissible_one(cid, query_id, query_caption, filt)
                ]
                if len(admissible) >= needed or len(prefix) == len(bucket_ids):
                    return admissible

        ids, matrix = self._bucket_matrix(candidate_space, rec.topic)
        if matrix.shape[1] != query.shape[0]:
            raise DimMismatch(matrix.shape[1], query.shape[0])
        scores = matrix @ query.astype(np.float64)

        mask = ids != np.uint64(query_id)
        if filt is not None:
            for ex in filt.exclude_ids:
                mask &= ids != np.uint64(ex)
        if query_caption is not None:
            qhash = np.uint64(_caption_hash(query_caption))
            for pos in np.flatnonzero(self._topic_caption_hashes(rec.topic) == qhash):
                if mask[pos] and self._corpus.get(int(ids[pos])).caption == query_caption:
                    mask[pos] = False
        if filt is not None and filt.predicate is not None:
            for pos in np.flatnonzero(mask):
                if not filt.predicate(int(ids[pos])):
                    mask[pos] = False

        adm = np.flatnonzero(mask)
        order = adm[np.lexsort((ids[adm], -scores[adm]))]
        return [int(i) for i in ids[order]]

    def nearest_candidate(
        self,
        query_id: int,
        query_space: Modality,
        candidate_space: Modality,
        filt: CandidateFilter | None = None,
        rank: int = 0,
    ) -> int:
        """The admissible in-topic candidate with the (rank+1)-th highest cosine."""
        if rank < 0:
            raise ValueError("rank must be non-negative")
        ranked = self._ranked(query_id, query_space, candidate_space, filt, needed=rank + 1)
        if rank >= len(ranked):
            raise NoCandidate(query_id, rank)
        return ranked[rank]

    def top_k(
        self,
        query_id: int,
        query_space: Modality,
        candidate_space: Modality,
        filt: CandidateFilter | None = None,
        k: int = 1,
    ) -> list[int]:
        """First k admissible candidates; shorter when the bucket runs out."""
        if k < 1:
            raise ValueError("k must be >= 1")
        return self._ranked(query_id, query_space, candidate_space, filt, needed=k)[:k]


def compute_topk_cache(
    index: SimilarityIndex,
    query_space: Modality,
    candidate_space: Modality,
    k: int,
) -> TopKCache:
    """Raw (unfiltered) top-k ranking prefix for every record in the corpus."""
    if k < 1:
        raise ValueError("k must be >= 1")
    cache = TopKCache(query_space=query_space, candidate_space=candidate_space, k=k)
    corpus = index._corpus
    for rec in sorted(corpus, key=lambda r: r.id):
        ids, matrix = index._bucket_matrix(candidate_space, rec.topic)
        query = index.store(query_space).vector(rec.id).astype(np.float64)
        scores = matrix @ query
        order = np.lexsort((ids, -scores))[:k]
        cache.lists[rec.id] = [int(i) for i in ids[order]]
    return cache


_TOPK_HEADER = struct.Struct("<4sHBBIQ")


def save_topk_cache(cache: TopKCache, path: str | Path) -> None:
    from .embeddings import _MODALITY_BYTE  # same byte coding as embedding files

    with open(path, "wb") as fh:
        fh.write(
            _TOPK_HEADER.pack(
                TOPK_MAGIC,
                TOPK_VERSION,
                _MODALITY_BYTE[cache.query_space],
                _MODALITY_BYTE[cache.candidate_space],
                cache.k,
                len(cache.lists),
            )
        )
        for query_id in sorted(cache.lists):
            ids = cache.lists[query_id]
            fh.write(struct.pack("<QI", query_id, len(ids)))
            fh.write(np.asarray(ids, dtype="<u8").tobytes())


def load_topk_cache(path: str | Path) -> TopKCache:
    from .embeddings import _BYTE_MODALITY

    data = Path(path).read_bytes()
    if len(data) < _TOPK_HEADER.size:
        raise TruncatedFile("shorter than top-k cache header")
    magic, version, qbyte, cbyte, k, count = _TOPK_HEADER.unpack_from(data, 0)
    if magic != TOPK_MAGIC:
        raise BadMagic(magic)
    if version != TOPK_VERSION:
        raise TruncatedFile(f"unsupported top-k cache version {version}")
    cache = TopKCache(query_space=_BYTE_MODALITY[qbyte], candidate_space=_BYTE_MODALITY[cbyte], k=k)
    offset = _TOPK_HEADER.size
    for _ in range(count):
        if offset + 12 > len(data):
            raise TruncatedFile("entry header past end of file")
        query_id, m = struct.unpack_from("<QI", data, offset)
        offset += 12
        if offset + 8 * m > len(data):
            raise TruncatedFile(f"id list for query {query_id} past end of file")
        cache.lists[query_id] = np.frombuffer(data, dtype="<u8", count=m, offset=offset).tolist()
        offset += 8 * m
    if offset != len(data):
        raise TruncatedFile("trailing bytes after last entry")
    return cache
