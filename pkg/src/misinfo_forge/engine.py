"""Strategy layer: generate truthful/falsified pairs, combine, balance, emit.

Every record's falsification is a pure function of (run seed, record id,
strategy kind), so output is byte-identical for any worker count and any
sharding. Emission sorts by (source id, label) and writes a manifest with
a SHA-256 checksum of the dataset bytes.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .embeddings import EmbeddingStore, Modality
from .errors import (
    EmptyClass,
    InadmissiblePair,
    IoFailure,
    MalformedRecord,
    MissingInput,
    NoAdmissibleReplacement,
    NoCandidate,
)
from .records import AnnotatedCaption, Corpus, NewsRecord
from .seeds import per_record_seed
from .similarity import CandidateFilter, SimilarityIndex, TopicIndex, TopKCache
from .swaps import EntityPool, build_entity_pool, pairwise_swap, random_swap

logger = logging.getLogger("misinfo_forge.engine")

_EMPTY_ANNOTATION = AnnotatedCaption(record_id=0, entities=())


class StrategyKind(str, Enum):
    RS_C = "rs-c"
    RST_C = "rst-c"
    RST_I = "rst-i"
    RST_ALT = "rst-alt"
    CST_C = "cst-c"
    CST_I = "cst-i"
    CST_ALT = "cst-alt"
    R_NEST = "r-nest"
    CLIP_NEST_C = "clip-nest-c"
    CLIP_NEST_I = "clip-nest-i"
    CLIP_NEST_ALT = "clip-nest-alt"


# Fixed tag per kind, mixed into per-record seeds; order is load-bearing
# for reproducibility and must never change.
KIND_TAG = {kind: tag for tag, kind in enumerate(StrategyKind)}

_NEI_KINDS = frozenset(
    {StrategyKind.R_NEST, StrategyKind.CLIP_NEST_C, StrategyKind.CLIP_NEST_I, StrategyKind.CLIP_NEST_ALT}
)
_SIMILARITY_KINDS = frozenset(
    {
        StrategyKind.CST_C,
        StrategyKind.CST_I,
        StrategyKind.CST_ALT,
        StrategyKind.CLIP_NEST_C,
        StrategyKind.CLIP_NEST_I,
        StrategyKind.CLIP_NEST_ALT,
    }
)
_ALT_KINDS = frozenset({StrategyKind.RST_ALT, StrategyKind.CST_ALT, StrategyKind.CLIP_NEST_ALT})
_CAPTION_VARIANT_KINDS = frozenset(
    {StrategyKind.RS_C, StrategyKind.RST_C, StrategyKind.CST_C, StrategyKind.CLIP_NEST_C}
)


class Label(str, Enum):
    TRUTHFUL = "truthful"
    OOC = "ooc"
    NEI = "nei"


LABEL_RANK = {Label.TRUTHFUL: 0, Label.OOC: 1, Label.NEI: 2}


@dataclass(frozen=True)
class Strategy:
    kind: StrategyKind
    seed: int
    retry_budget: int = 10

    def __post_init__(self):
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.retry_budget < 1:
            raise ValueError("retry_budget must be positive")


@dataclass(frozen=True)
class Provenance:
    strategy: str
    source_id: int
    donor_id: int | None
    seed: int


@dataclass(frozen=True)
class GeneratedPair:
    image_id: int
    caption_text: str
    label: Label
    provenance: Provenance


class GenBalance(str, Enum):
    KEEP_ALL = "keep-all"
    BALANCED = "balanced"


class HybridBalance(str, Enum):
    NONE = "none"
    DOWNSAMPLE = "downsample"


@dataclass(frozen=True)
class HybridSpec:
    balance: HybridBalance
    seed: int


def _sort_key(pair: GeneratedPair):
    return (pair.provenance.source_id, LABEL_RANK[pair.label], pair.image_id, pair.caption_text)


@dataclass
class _RunContext:
    corpus: Corpus
    topics: TopicIndex
    strategy: Strategy
    annotations: Mapping[int, AnnotatedCaption]
    pool: EntityPool | None
    sim: SimilarityIndex | None
    all_ids: np.ndarray


def _check_inputs(
    kind: StrategyKind,
    stores: Mapping[Modality, EmbeddingStore] | None,
    annotations: Mapping[int, AnnotatedCaption] | None,
) -> None:
    stores = stores or {}
    needs_text = kind in (StrategyKind.CST_C, StrategyKind.CST_ALT, StrategyKind.CLIP_NEST_C, StrategyKind.CLIP_NEST_ALT)
    needs_image = kind in (StrategyKind.CST_I, StrategyKind.CST_ALT, StrategyKind.CLIP_NEST_I, StrategyKind.CLIP_NEST_ALT)
    if needs_text and Modality.TEXT not in stores:
        raise MissingInput(kind.value, "text embeddings")
    if needs_image and Modality.IMAGE not in stores:
        raise MissingInput(kind.value, "image embeddings")
    if kind in _NEI_KINDS and annotations is None:
        raise MissingInput(kind.value, "entity annotations")


def _draw_variant(kind: StrategyKind, rng: np.random.Generator) -> str:
    """Image-or-caption choice; alt kinds flip a fair per-record coin."""
    if kind in _ALT_KINDS:
        return "image" if int(rng.integers(2)) == 0 else "caption"
    return "caption" if kind in _CAPTION_VARIANT_KINDS else "image"


_REJECTION_TRIES = 256


def _draw_uniform(
    ctx: _RunContext, rec: NewsRecord, rng: np.random.Generator, ids: np.ndarray, want: str
) -> NewsRecord | None:
    """Uniform admissible donor from `ids`, rejection sampling first.

    Caption draws reject donors whose caption equals the source's (a same
    caption would not mislabel); image draws reject only the source itself.
    The exhaustive fallback keeps pathological buckets correct.
    """
    n = len(ids)
    if n == 0:
        return None

    def admissible(donor: NewsRecord) -> bool:
        if want == "caption":
            return donor.caption != rec.caption
        return donor.id != rec.id

    for _ in range(_REJECTION_TRIES):
        donor = ctx.corpus.get(int(ids[int(rng.integers(n))]))
        if admissible(donor):
            return donor
    pool = [i for i in ids.tolist() if admissible(ctx.corpus.get(i))]
    if not pool:
        return None
    return ctx.corpus.get(pool[int(rng.integers(len(pool)))])


def _nearest_donor(ctx: _RunContext, rec: NewsRecord, want: str) -> NewsRecord | None:
    space = Modality.TEXT if want == "caption" else Modality.IMAGE
    try:
        donor_id = ctx.sim.nearest_candidate(rec.id, space, space, None, rank=0)
    except NoCandidate:
        return None
    return ctx.corpus.get(donor_id)


def _ooc_pair(rec: NewsRecord, donor: NewsRecord, want: str, prov_seed: int, kind: StrategyKind) -> GeneratedPair:
    if want == "caption":
        image_id, caption = rec.id, donor.caption
    else:
        image_id, caption = donor.id, rec.caption
    return GeneratedPair(
        image_id=image_id,
        caption_text=caption,
        label=Label.OOC,
        provenance=Provenance(kind.value, rec.id, donor.id, prov_seed),
    )


def _spans_of(ctx: _RunContext, record_id: int) -> AnnotatedCaption:
    return ctx.annotations.get(record_id, _EMPTY_ANNOTATION)


def _clip_nest_swap(ctx: _RunContext, rec: NewsRecord, want: str):
    """Nearest admissible annotated neighbor, advancing rank on inadmissible pairs."""
    space = Modality.TEXT if want == "caption" else Modality.IMAGE
    filt = CandidateFilter.for_query(rec.id, predicate=lambda cid: len(_spans_of(ctx, cid).entities) > 0)
    for rank in range(ctx.strategy.retry_budget + 1):
        try:
            donor_id = ctx.sim.nearest_candidate(rec.id, space, space, filt, rank=rank)
        except NoCandidate:
            return None, None, "candidates exhausted"
        donor = ctx.corpus.get(donor_id)
        try:
            swap = pairwise_swap(rec, _spans_of(ctx, rec.id), donor, _spans_of(ctx, donor_id))
            return donor, swap, None
        except InadmissiblePair:
            continue
    return None, None, f"no admissible pair within retry budget {ctx.strategy.retry_budget}"


def _falsify(ctx: _RunContext, rec: NewsRecord, seed: int):
    """One falsified pair for `rec`, or (None, reason)."""
    kind = ctx.strategy.kind
    rng = np.random.Generator(np.random.PCG64(seed))
    want = _draw_variant(kind, rng)

    if kind in _NEI_KINDS:
        if not _spans_of(ctx, rec.id).entities:
            return None, "no entity spans"
        if kind is StrategyKind.R_NEST:
            try:
                swap = random_swap(rec, ctx.annotations[rec.id], ctx.pool, seed)
            except NoAdmissibleReplacement:
                return None, "no admissible replacement in pools"
            donor_id = None
        else:
            donor, swap, reason = _clip_nest_swap(ctx, rec, want)
            if swap is None:
                return None, reason
            donor_id = donor.id
        pair = GeneratedPair(
            image_id=rec.id,
            caption_text=swap.falsified_caption,
            label=Label.NEI,
            provenance=Provenance(kind.value, rec.id, donor_id, seed),
        )
        return pair, None

    if kind is StrategyKind.RS_C:
        donor = _draw_uniform(ctx, rec, rng, ctx.all_ids, want)
    elif kind in (StrategyKind.RST_C, StrategyKind.RST_I, StrategyKind.RST_ALT):
        donor = _draw_uniform(ctx, rec, rng, ctx.topics.bucket(rec.topic), want)
    else:
        donor = _nearest_donor(ctx, rec, want)
    if donor is None:
        return None, f"no admissible {want} donor"
    return _ooc_pair(rec, donor, want, seed, kind), None


def _record_pairs(ctx: _RunContext, rec: NewsRecord, balance: GenBalance):
    kind = ctx.strategy.kind
    seed = per_record_seed(ctx.strategy.seed, rec.id, KIND_TAG[kind])
    falsified, reason = _falsify(ctx, rec, seed)
    # Truthful provenance seed is fixed at 0: the truthful set must be
    # byte-identical across run seeds.
    truthful = GeneratedPair(
        image_id=rec.id,
        caption_text=rec.caption,
        label=Label.TRUTHFUL,
        provenance=Provenance(kind.value, rec.id, None, 0),
    )
    if falsified is None:
        if balance is GenBalance.BALANCED:
            return [], reason
        return [truthful], reason
    return [truthful, falsified], None


def generate(
    corpus: Corpus,
    stores: Mapping[Modality, EmbeddingStore] | None,
    annotations: Mapping[int, AnnotatedCaption] | None,
    topic_index: TopicIndex,
    strategy: Strategy,
    balance: GenBalance = GenBalance.KEEP_ALL,
    workers: int = 1,
    topk_cache: TopKCache | None = None,
) -> list[GeneratedPair]:
    """Emit one truthful pair per source record and attempt one falsified pair.

    Under keep-all, records whose falsification fails still contribute
    their truthful pair; under balanced, both twins are dropped so
    |Truthful| = |Falsified| exactly. Output is sorted by (source id,
    label) and is independent of `workers`.
    """
    kind = strategy.kind
    _check_inputs(kind, stores, annotations)
    sim = None
    if kind in _SIMILARITY_KINDS:
        sim = SimilarityIndex(corpus, topic_index, stores, topk_cache=topk_cache)
    pool = None
    ann = annotations or {}
    if kind is StrategyKind.R_NEST:
        pool = build_entity_pool(corpus, ann)
    ctx = _RunContext(
        corpus=corpus,
        topics=topic_index,
        strategy=strategy,
        annotations=ann,
        pool=pool,
        sim=sim,
        all_ids=np.array(sorted(corpus.ids()), dtype=np.uint64),
    )

    records = list(corpus)
    if workers <= 1:
        shards = [_record_pairs(ctx, rec, balance) for rec in records]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool_exec:
            shards = list(pool_exec.map(lambda r: _record_pairs(ctx, r, balance), records))

    pairs: list[GeneratedPair] = []
    failures = 0
    for emitted, reason in shards:
        pairs.extend(emitted)
        if reason is not None:
            failures += 1
    if failures:
        logger.info("%s: falsification failed for %d of %d records", kind.value, failures, len(records))
    pairs.sort(key=_sort_key)
    return pairs


def combine_hybrid(
    spec: HybridSpec,
    ooc_pairs: Iterable[GeneratedPair],
    nei_pairs: Iterable[GeneratedPair],
) -> list[GeneratedPair]:
    """Merge an OOC run and an NEI run into one three-class dataset.

    Truthful pairs from the two runs are deduplicated by (image id,
    caption); with downsample balancing each class is reduced by seeded
    uniform sampling without replacement to the smallest class size.
    """
    truthful: list[GeneratedPair] = []
    seen: set[tuple[int, str]] = set()
    ooc: list[GeneratedPair] = []
    nei: list[GeneratedPair] = []
    for pair in sorted(list(ooc_pairs) + list(nei_pairs), key=_sort_key):
        if pair.label is Label.TRUTHFUL:
            key = (pair.image_id, pair.caption_text)
            if key not in seen:
                seen.add(key)
                truthful.append(pair)
        elif pair.label is Label.OOC:
            ooc.append(pair)
        else:
            nei.append(pair)

    classes = {Label.TRUTHFUL: truthful, Label.OOC: ooc, Label.NEI: nei}
    for label, members in classes.items():
        if not members:
            raise EmptyClass(label.value)

    if spec.balance is HybridBalance.DOWNSAMPLE:
        target = min(len(m) for m in classes.values())
        rng = np.random.Generator(np.random.PCG64(spec.seed))
        # Classes sampled in fixed label order so the draw sequence is stable.
        for label in (Label.TRUTHFUL, Label.OOC, Label.NEI):
            members = classes[label]
            if len(members) > target:
                keep = sorted(rng.choice(len(members), size=target, replace=False).tolist())
                classes[label] = [members[i] for i in keep]

    merged = classes[Label.TRUTHFUL] + classes[Label.OOC] + classes[Label.NEI]
    merged.sort(key=_sort_key)
    return merged


def _pair_to_json(pair: GeneratedPair) -> str:
    prov = pair.provenance
    obj = {
        "image_id": pair.image_id,
        "caption": pair.caption_text,
        "label": pair.label.value,
        "provenance": {
            "strategy": prov.strategy,
            "source_id": prov.source_id,
            "donor_id": prov.donor_id,
            "seed": prov.seed,
        },
    }
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def _pair_from_json(line: str, lineno: int) -> GeneratedPair:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(lineno, f"invalid JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise MalformedRecord(lineno, "expected an object")
    try:
        label = Label(obj["label"])
        prov = obj.get("provenance") or {}
        return GeneratedPair(
            image_id=int(obj["image_id"]),
            caption_text=str(obj["caption"]),
            label=label,
            provenance=Provenance(
                strategy=str(prov.get("strategy", "unknown")),
                source_id=int(prov.get("source_id", obj["image_id"])),
                donor_id=None if prov.get("donor_id") is None else int(prov["donor_id"]),
                seed=int(prov.get("seed", 0)),
            ),
        )
    except KeyError as exc:
        raise MalformedRecord(lineno, f"missing field {exc.args[0]!r}") from None
    except ValueError as exc:
        raise MalformedRecord(lineno, str(exc)) from None


@dataclass(frozen=True)
class Manifest:
    total: int
    counts: dict[str, int]
    strategy: str
    seed: int
    retry_budget: int | None
    split: str | None
    checksum: str
    config: dict | None = None

    def to_json(self) -> str:
        obj = {
            "total": self.total,
            "counts": self.counts,
            "strategy": self.strategy,
            "seed": self.seed,
            "retry_budget": self.retry_budget,
            "split": self.split,
            "checksum": self.checksum,
            "config": self.config,
        }
        return json.dumps(obj, ensure_ascii=False, indent=2) + "\n"


def manifest_path(out_path: str | Path) -> Path:
    return Path(str(out_path) + ".manifest.json")


def emit_dataset(
    pairs: Sequence[GeneratedPair],
    out_path: str | Path,
    strategy_label: str,
    seed: int,
    retry_budget: int | None = None,
    split: str | None = None,
    config: dict | None = None,
) -> Manifest:
    """Write the dataset (JSONL, sorted) and its checksummed manifest."""
    ordered = sorted(pairs, key=_sort_key)
    body = "".join(_pair_to_json(p) + "\n" for p in ordered).encode("utf-8")
    counts = {label.value: 0 for label in Label}
    for pair in ordered:
        counts[pair.label.value] += 1
    checksum = "sha256:" + hashlib.sha256(body).hexdigest()
    manifest = Manifest(
        total=len(ordered),
        counts=counts,
        strategy=strategy_label,
        seed=seed,
        retry_budget=retry_budget,
        split=split,
        checksum=checksum,
        config=config,
    )
    out_path = Path(out_path)
    try:
        out_path.write_bytes(body)
        manifest_path(out_path).write_text(manifest.to_json(), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(out_path), str(exc)) from None
    return manifest


def load_dataset(path: str | Path) -> list[GeneratedPair]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(path), str(exc)) from None
    pairs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            pairs.append(_pair_from_json(line, lineno))
    return pairs


@dataclass(frozen=True)
class DatasetStats:
    counts: dict[str, int]
    total: int


def dataset_stats(path: str | Path) -> DatasetStats:
    counts = {label.value: 0 for label in Label}
    total = 0
    for pair in load_dataset(path):
        counts[pair.label.value] += 1
        total += 1
    return DatasetStats(counts=counts, total=total)


def render_stats(stats: DatasetStats, name: str = "dataset") -> str:
    """One row of per-class instance counts, thousands separated."""
    headers = ["Dataset", "Truthful", "OOC", "NEI", "Total"]
    row = [
        name,
        f"{stats.counts[Label.TRUTHFUL.value]:,}",
        f"{stats.counts[Label.OOC.value]:,}",
        f"{stats.counts[Label.NEI.value]:,}",
        f"{stats.total:,}",
    ]
    widths = [max(len(h), len(r)) for h, r in zip(headers, row)]
    head = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    line = "  ".join(r.rjust(w) if i else r.ljust(w) for i, (r, w) in enumerate(zip(row, widths)))
    return head + "\n" + line
