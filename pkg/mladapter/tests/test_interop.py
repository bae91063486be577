"""Round trips against the dataset engine's own command line.

Every exchange goes through files: this suite feeds engine commands with
corpora, embedding stores and annotations written by this package, then
consumes the datasets the engine emits. The engine is invoked as a
subprocess so no code is shared beyond the formats.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from mmd_adapter import (
    BenchmarkItem,
    FakeBackend,
    HeuristicBackend,
    extract_embeddings,
    extract_entities,
    load_checkpoint,
    read_dataset,
    read_predictions,
    read_store,
    write_annotations,
    write_benchmark,
    write_corpus,
)
from mmd_adapter.cli import main as adapter_main
from click.testing import CliRunner

from conftest import VOCAB, make_corpus

ENGINE = [sys.executable, "-m", "misinfo_forge.cli"]
DIM = 16


def engine(*args):
    proc = subprocess.run([*ENGINE, *args], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr or proc.stdout
    return proc.stdout


def adapter(*args):
    res = CliRunner().invoke(adapter_main, list(args))
    assert res.exit_code == 0, res.output
    return res.output


@pytest.fixture(scope="module")
def shared(tmp_path_factory):
    """Corpus, stores and annotations produced by this package."""
    tmp_path = tmp_path_factory.mktemp("interop")
    records = make_corpus(36, n_topics=3)
    corpus = tmp_path / "corpus.jsonl"
    write_corpus(records, corpus)
    extract_embeddings(records, FakeBackend(dim=DIM), tmp_path / "img.mfeb", tmp_path / "txt.mfeb")
    annotations = extract_entities(records, HeuristicBackend(VOCAB))
    write_annotations(annotations, tmp_path / "entities.jsonl")
    return tmp_path, records


class TestEngineReadsOurFiles:
    def test_engine_generates_from_our_corpus_and_stores(self, shared):
        tmp_path, records = shared
        out = tmp_path / "ooc.jsonl"
        engine(
            "generate", "--corpus", str(tmp_path / "corpus.jsonl"),
            "--image-embeddings", str(tmp_path / "img.mfeb"),
            "--text-embeddings", str(tmp_path / "txt.mfeb"),
            "--strategy", "cst-alt", "--seed", "3", "--out", str(out),
        )
        rows = read_dataset(out)
        labels = {r.label for r in rows}
        assert labels == {"truthful", "ooc"}
        assert sum(r.label == "truthful" for r in rows) == len(records)

    def test_engine_swaps_entities_from_our_annotations(self, shared):
        # Zero span rejections: the engine validates every span on load.
        tmp_path, records = shared
        out = tmp_path / "nei.jsonl"
        engine(
            "generate", "--corpus", str(tmp_path / "corpus.jsonl"),
            "--entities", str(tmp_path / "entities.jsonl"),
            "--strategy", "r-nest", "--seed", "5", "--out", str(out),
        )
        rows = read_dataset(out)
        by_id = {r.id: r for r in records}
        swapped = [r for r in rows if r.label == "nei"]
        assert swapped
        for row in swapped:
            assert row.caption != by_id[row.image_id].caption

    def test_engine_ranking_cache_accepts_our_store(self, shared):
        tmp_path, _ = shared
        cache = tmp_path / "cache.mftk"
        engine(
            "index", "--corpus", str(tmp_path / "corpus.jsonl"),
            "--image-embeddings", str(tmp_path / "img.mfeb"),
            "--text-embeddings", str(tmp_path / "txt.mfeb"),
            "--space", "text", "--k", "8", "--out", str(cache),
        )
        assert cache.stat().st_size > 0


class TestWeReadEngineFiles:
    def test_engine_store_loads_here(self, shared):
        tmp_path, records = shared
        out = tmp_path / "engine.mfeb"
        engine(
            "mock-embed", "--corpus", str(tmp_path / "corpus.jsonl"),
            "--dim", "24", "--modality", "image", "--seed", "2", "--out", str(out),
        )
        modality, ids, matrix = read_store(out)
        assert modality == "image"
        assert matrix.shape == (len(records), 24)
        norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
        assert np.all(np.abs(norms - 1.0) < 1e-4)

    def test_engine_dataset_loads_here(self, shared):
        tmp_path, _ = shared
        out = tmp_path / "ooc2.jsonl"
        engine(
            "generate", "--corpus", str(tmp_path / "corpus.jsonl"),
            "--image-embeddings", str(tmp_path / "img.mfeb"),
            "--text-embeddings", str(tmp_path / "txt.mfeb"),
            "--strategy", "rst-c", "--seed", "11", "--out", str(out),
        )
        rows = read_dataset(out)
        assert all(r.provenance["strategy"] in ("truthful", "rst-c") for r in rows)
        manifest = json.loads((tmp_path / "ooc2.jsonl.manifest.json").read_text())
        assert manifest["total"] == len(rows)


class TestFullLoop:
    def test_train_on_engine_dataset_and_score_with_engine(self, shared, tmp_path):
        tmp_path_shared, records = shared
        corpus = tmp_path_shared / "corpus.jsonl"

        # Engine builds train/val datasets from files this package wrote.
        train = tmp_path / "train.jsonl"
        val = tmp_path / "val.jsonl"
        for seed, out in [(21, train), (22, val)]:
            engine(
                "generate", "--corpus", str(corpus),
                "--image-embeddings", str(tmp_path_shared / "img.mfeb"),
                "--text-embeddings", str(tmp_path_shared / "txt.mfeb"),
                "--strategy", "rst-c", "--seed", str(seed), "--out", str(out),
            )

        # This package encodes captions and trains on those datasets.
        for data, cap in [(train, "train-cap.mfeb"), (val, "val-cap.mfeb")]:
            adapter("encode-captions", "--dataset", str(data), "--backend", "fake", "--dim", str(DIM), "--out", str(tmp_path / cap))
        checkpoint = tmp_path / "model.pt"
        adapter(
            "train", "--train", str(train), "--val", str(val),
            "--image-embeddings", str(tmp_path_shared / "img.mfeb"),
            "--train-captions", str(tmp_path / "train-cap.mfeb"),
            "--val-captions", str(tmp_path / "val-cap.mfeb"),
            "--max-epochs", "1", "--out", str(checkpoint),
        )
        config, _ = load_checkpoint(checkpoint)
        assert config.classes == 2

        # Benchmark from the validation rows, predictions from this package.
        val_rows = read_dataset(val)
        bench = tmp_path / "bench.jsonl"
        write_benchmark(
            [BenchmarkItem(id=i, image_id=r.image_id, caption=r.caption, true_label=r.label) for i, r in enumerate(val_rows)],
            bench,
        )
        adapter("encode-captions", "--benchmark", str(bench), "--backend", "fake", "--dim", str(DIM), "--out", str(tmp_path / "bench-cap.mfeb"))
        preds = tmp_path / "preds.jsonl"
        adapter(
            "predict", "--checkpoint", str(checkpoint), "--benchmark", str(bench),
            "--image-embeddings", str(tmp_path_shared / "img.mfeb"),
            "--captions", str(tmp_path / "bench-cap.mfeb"), "--out", str(preds),
        )
        assert len(read_predictions(preds)) == len(val_rows)

        # The engine's scorer accepts and reports on those predictions.
        report = tmp_path / "report.jsonl"
        output = engine(
            "evaluate", "--benchmark", str(bench), "--predictions", str(preds),
            "--strategy", "rst-c", "--out", str(report),
        )
        assert "accuracy" in output.lower() or "/" in output
        row = json.loads(report.read_text().splitlines()[0])
        assert row["n"] == len(val_rows)
        assert 0.0 <= row["accuracy"] <= 1.0
