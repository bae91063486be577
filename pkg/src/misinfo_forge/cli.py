"""Operator surface: reproducible pipeline runs over the library modules.

Every flag can also be set in a JSON config file (--config); flags given
on the command line override file values. Usage errors exit 2, data
errors exit 1. The MISINFO_FORGE_LOG environment variable selects the
log level (error, warn, info, debug).
"""

from __future__ import annotations

import functools
import json
import logging
import os
import sys
from pathlib import Path

import click

from .adapters import ExternalFormat, import_external
from .embeddings import Modality, load_embeddings, mock_embed, save_embeddings
from .engine import (
    GenBalance,
    HybridBalance,
    HybridSpec,
    Label,
    Strategy,
    StrategyKind,
    combine_hybrid,
    dataset_stats,
    emit_dataset,
    generate,
    load_dataset,
    render_stats,
)
from .errors import MisinfoForgeError
from .evaluation import (
    load_benchmark,
    load_predictions,
    load_reports,
    render_report,
    save_benchmark,
    save_reports,
    score,
)
from .records import Split, load_annotations, load_corpus
from .similarity import build_topic_index, compute_topk_cache, load_topk_cache, save_topk_cache

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    raw = os.environ.get("MISINFO_FORGE_LOG", "warn").lower()
    level = _LOG_LEVELS.get(raw)
    if level is None:
        print(f"ignoring unknown MISINFO_FORGE_LOG value {raw!r}", file=sys.stderr)
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _data_errors(fn):
    """Map library errors to exit code 1; click keeps usage errors at 2."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except MisinfoForgeError as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON file of per-subcommand flag defaults.")
@click.pass_context
def main(ctx, config_path):
    """Dataset forge and evaluation harness for multimodal misinformation detection."""
    _setup_logging()
    if config_path is not None:
        with open(config_path, encoding="utf-8") as fh:
            try:
                defaults = json.load(fh)
            except json.JSONDecodeError as exc:
                raise click.ClickException(f"bad config file {config_path}: {exc.msg}")
        if not isinstance(defaults, dict):
            raise click.ClickException(f"bad config file {config_path}: expected an object")
        ctx.default_map = defaults


def _load_stores(image_path, text_path):
    stores = {}
    if image_path:
        stores[Modality.IMAGE] = load_embeddings(image_path)
    if text_path:
        stores[Modality.TEXT] = load_embeddings(text_path)
    return stores


def _split_corpus(corpus, split: str):
    if split == "all":
        return corpus
    return corpus.filter_split(Split(split))


_STRATEGY_CHOICES = [k.value for k in StrategyKind]


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--image-embeddings", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--text-embeddings", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--space", type=click.Choice(["image", "text"]), required=True,
              help="Embedding space to rank in (query and candidates).")
@click.option("--k", type=click.IntRange(min=1), default=16, show_default=True)
@click.option("--split", type=click.Choice(["train", "val", "test", "all"]), default="train", show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_data_errors
def index(corpus, image_embeddings, text_embeddings, space, k, split, out):
    """Precompute a top-k ranking cache for one embedding space."""
    from .similarity import SimilarityIndex

    corp = _split_corpus(load_corpus(corpus), split)
    stores = _load_stores(image_embeddings, text_embeddings)
    modality = Modality(space)
    if modality not in stores:
        raise click.UsageError(f"--{space}-embeddings is required for --space {space}")
    sim = SimilarityIndex(corp, build_topic_index(corp), stores)
    cache = compute_topk_cache(sim, modality, modality, k)
    save_topk_cache(cache, out)
    click.echo(f"wrote top-{k} cache for {len(cache.lists)} records to {out}")


@main.command(name="generate")
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--image-embeddings", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--text-embeddings", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--entities", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--strategy", type=click.Choice(_STRATEGY_CHOICES), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--retry-budget", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--balance", type=click.Choice([b.value for b in GenBalance]), default=GenBalance.KEEP_ALL.value,
              show_default=True)
@click.option("--workers", type=click.IntRange(min=1), default=None,
              help="Generation threads; output is identical for any value. Default: CPU count.")
@click.option("--split", type=click.Choice(["train", "val", "test", "all"]), default="train", show_default=True)
@click.option("--topk-cache", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Optional ranking cache from `index`; never changes results.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_data_errors
def generate_cmd(corpus, image_embeddings, text_embeddings, entities, strategy, seed, retry_budget,
                 balance, workers, split, topk_cache, out):
    """Generate truthful plus falsified pairs with one misinformer strategy."""
    full = load_corpus(corpus)
    # Annotations are validated against the full corpus; the split filter
    # narrows the record set afterwards.
    annotations = load_annotations(entities, full) if entities else None
    corp = _split_corpus(full, split)
    stores = _load_stores(image_embeddings, text_embeddings)
    cache = load_topk_cache(topk_cache) if topk_cache else None
    strat = Strategy(kind=StrategyKind(strategy), seed=seed, retry_budget=retry_budget)
    if workers is None:
        workers = os.cpu_count() or 1
    pairs = generate(
        corp,
        stores,
        annotations,
        build_topic_index(corp),
        strat,
        balance=GenBalance(balance),
        workers=workers,
        topk_cache=cache,
    )
    # Worker count and cache use are performance knobs with no effect on
    # output, so they stay out of the manifest's echoed config.
    config = {
        "corpus": str(corpus),
        "split": split,
        "strategy": strategy,
        "seed": seed,
        "retry_budget": retry_budget,
        "balance": balance,
        "image_embeddings": None if image_embeddings is None else str(image_embeddings),
        "text_embeddings": None if text_embeddings is None else str(text_embeddings),
        "entities": None if entities is None else str(entities),
    }
    manifest = emit_dataset(pairs, out, strategy_label=strategy, seed=seed,
                            retry_budget=retry_budget, split=split, config=config)
    click.echo(f"wrote {manifest.total} pairs to {out} ({manifest.checksum})")


@main.command()
@click.option("--ooc", "ooc_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Dataset file from an OOC strategy run.")
@click.option("--nei", "nei_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Dataset file from an NEI strategy run.")
@click.option("--balance", type=click.Choice([b.value for b in GenBalance]), default=GenBalance.KEEP_ALL.value,
              show_default=True, help="balanced applies random down-sampling to the smallest class.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_data_errors
def combine(ooc_path, nei_path, balance, seed, out):
    """Merge an OOC run and an NEI run into a three-class hybrid dataset."""
    ooc_pairs = load_dataset(ooc_path)
    nei_pairs = load_dataset(nei_path)
    hybrid_balance = HybridBalance.DOWNSAMPLE if balance == GenBalance.BALANCED.value else HybridBalance.NONE
    pairs = combine_hybrid(HybridSpec(balance=hybrid_balance, seed=seed), ooc_pairs, nei_pairs)

    def tag_of(pairs, label):
        for p in pairs:
            if p.label is label:
                return p.provenance.strategy
        return "?"

    label = f"{tag_of(nei_pairs, Label.NEI)} + {tag_of(ooc_pairs, Label.OOC)}"
    config = {"ooc": str(ooc_path), "nei": str(nei_path), "balance": balance, "seed": seed}
    manifest = emit_dataset(pairs, out, strategy_label=label, seed=seed, config=config)
    click.echo(f"wrote {manifest.total} pairs to {out} ({manifest.checksum})")


@main.command()
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@_data_errors
def stats(dataset):
    """Per-class instance counts of a dataset file."""
    click.echo(render_stats(dataset_stats(dataset), name=Path(dataset).name))


@main.command(name="mock-embed")
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--dim", type=click.IntRange(min=8), default=64, show_default=True)
@click.option("--modality", type=click.Choice(["image", "text"]), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_data_errors
def mock_embed_cmd(corpus, dim, modality, seed, out):
    """Deterministic stand-in embeddings keyed on record content."""
    corp = load_corpus(corpus)
    store = mock_embed(corp, dim=dim, modality=Modality(modality), seed=seed)
    save_embeddings(store, out)
    click.echo(f"wrote {store.count} {modality} vectors (dim {dim}) to {out}")


@main.command(name="import")
@click.option("--format", "fmt", type=click.Choice([f.value for f in ExternalFormat]), required=True)
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Corpus for resolving captions referenced by id.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_data_errors
def import_cmd(fmt, in_path, corpus, out):
    """Normalize an external dataset into native files."""
    corp = load_corpus(corpus) if corpus else None
    result = import_external(fmt, in_path, corpus=corp)
    if fmt == ExternalFormat.COSMOS_TEST.value:
        save_benchmark(result, out)
        click.echo(f"wrote {len(result)} benchmark items to {out}")
        return
    config = {"format": fmt, "in": str(in_path), "corpus": None if corpus is None else str(corpus)}
    manifest = emit_dataset(result, out, strategy_label=fmt, seed=0, config=config)
    click.echo(f"wrote {manifest.total} pairs to {out} ({manifest.checksum})")


@main.command()
@click.option("--benchmark", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--predictions", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--strategy", default="", help="Strategy tag recorded in the report.")
@click.option("--modality", type=click.Choice(["image-only", "text-only", "multimodal"]), default="multimodal",
              show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Append-ready JSONL report file; omit to only print.")
@_data_errors
def evaluate(benchmark, predictions, strategy, modality, out):
    """Score a prediction file against a benchmark."""
    report = score(load_benchmark(benchmark), load_predictions(predictions), strategy=strategy, modality=modality)
    if out:
        save_reports([report], out)
    click.echo(render_report([report], layout="table2"))
    click.echo(f"n={report.n} tt={report.tt} tf={report.tf} ft={report.ft} ff={report.ff}")


@main.command()
@click.option("--reports", "reports_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--layout", type=click.Choice(["table2", "table3"]), default="table2", show_default=True)
@_data_errors
def report(reports_path, layout):
    """Render a report file as an aligned table."""
    click.echo(render_report(load_reports(reports_path), layout=layout))


if __name__ == "__main__":
    main()
