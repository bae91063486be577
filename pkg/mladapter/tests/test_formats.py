"""File format round-trips and validation."""

import json
import struct

import numpy as np
import pytest

from mmd_adapter import (
    BadStore,
    BenchmarkItem,
    CorpusRecord,
    EntitySpanRec,
    MalformedLine,
    read_annotations,
    read_benchmark,
    read_corpus,
    read_dataset,
    read_predictions,
    read_store,
    write_annotations,
    write_benchmark,
    write_corpus,
    write_predictions,
    write_store,
)
from mmd_adapter.formats import store_lookup

from conftest import make_corpus


class TestCorpus:
    def test_round_trip(self, tmp_path):
        records = make_corpus(12)
        path = tmp_path / "corpus.jsonl"
        write_corpus(records, path)
        assert read_corpus(path) == records

    def test_key_order_is_stable(self, tmp_path):
        # Consumers downstream diff these files byte for byte.
        rec = CorpusRecord(id=3, image_ref="a.jpg", caption="x", topic="t", source="s", split="train")
        path = tmp_path / "corpus.jsonl"
        write_corpus([rec], path)
        line = path.read_text(encoding="utf-8").strip()
        assert line == '{"id":3,"image_ref":"a.jpg","caption":"x","topic":"t","source":"s","split":"train"}'

    def test_unicode_survives(self, tmp_path):
        rec = CorpusRecord(id=0, image_ref="ü.jpg", caption="Zürich café", topic="t", source="s", split="val")
        path = tmp_path / "corpus.jsonl"
        write_corpus([rec], path)
        assert "Zürich" in path.read_text(encoding="utf-8")
        assert read_corpus(path)[0].caption == "Zürich café"

    def test_duplicate_id_rejected(self, tmp_path):
        records = make_corpus(2)
        path = tmp_path / "corpus.jsonl"
        write_corpus([records[0], records[0]], path)
        with pytest.raises(MalformedLine) as err:
            read_corpus(path)
        assert err.value.line == 2

    def test_missing_field_names_line(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text('{"id":0,"image_ref":"a","caption":"c","topic":"t","source":"s","split":"train"}\n{"id":1}\n')
        with pytest.raises(MalformedLine) as err:
            read_corpus(path)
        assert err.value.line == 2
        assert "image_ref" in str(err.value)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text("{not json\n")
        with pytest.raises(MalformedLine):
            read_corpus(path)


class TestAnnotations:
    def test_round_trip_skips_empty(self, tmp_path):
        spans = {
            4: [EntitySpanRec("PERSON", 0, 5, "Alice")],
            2: [EntitySpanRec("GPE", 9, 15, "Berlin"), EntitySpanRec("ORG", 20, 24, "Acme")],
            7: [],
        }
        path = tmp_path / "entities.jsonl"
        write_annotations(spans, path)
        loaded = read_annotations(path)
        assert set(loaded) == {2, 4}
        assert loaded[2][1].surface == "Acme"

    def test_sorted_by_record_id(self, tmp_path):
        spans = {9: [EntitySpanRec("PERSON", 0, 3, "Bob")], 1: [EntitySpanRec("PERSON", 0, 3, "Eve")]}
        path = tmp_path / "entities.jsonl"
        write_annotations(spans, path)
        ids = [json.loads(line)["record_id"] for line in path.read_text().splitlines()]
        assert ids == [1, 9]

    def test_exact_span_shape(self, tmp_path):
        path = tmp_path / "entities.jsonl"
        write_annotations({5: [EntitySpanRec("ORG", 2, 6, "Acme")]}, path)
        assert path.read_text(encoding="utf-8") == (
            '{"record_id":5,"entities":[{"etype":"ORG","start":2,"end":6,"surface":"Acme"}]}\n'
        )


class TestDatasetAndBenchmark:
    def test_read_dataset(self, tmp_path):
        path = tmp_path / "data.jsonl"
        rows = [
            {"image_id": 1, "caption": "a", "label": "truthful",
             "provenance": {"strategy": "rst-c", "source_id": 1, "donor_id": None, "seed": 0}},
            {"image_id": 2, "caption": "b", "label": "ooc",
             "provenance": {"strategy": "rst-c", "source_id": 1, "donor_id": 2, "seed": 9}},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        loaded = read_dataset(path)
        assert [r.label for r in loaded] == ["truthful", "ooc"]
        assert loaded[1].provenance["donor_id"] == 2

    def test_dataset_missing_label(self, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text('{"image_id":1,"caption":"a"}\n')
        with pytest.raises(MalformedLine) as err:
            read_dataset(path)
        assert "label" in str(err.value)

    def test_benchmark_round_trip(self, tmp_path):
        items = [
            BenchmarkItem(id=0, image_id=4, caption="x", true_label="truthful"),
            BenchmarkItem(id="k-1", image_id=5, caption="y", true_label="nei"),
        ]
        path = tmp_path / "bench.jsonl"
        write_benchmark(items, path)
        assert read_benchmark(path) == items

    def test_benchmark_duplicate_id(self, tmp_path):
        items = [BenchmarkItem(0, 1, "a", "truthful"), BenchmarkItem(0, 2, "b", "ooc")]
        path = tmp_path / "bench.jsonl"
        write_benchmark(items, path)
        with pytest.raises(MalformedLine):
            read_benchmark(path)

    def test_predictions_round_trip(self, tmp_path):
        path = tmp_path / "preds.jsonl"
        write_predictions([(0, "truthful", [0.9, 0.1]), ("x", "falsified", None)], path)
        loaded = read_predictions(path)
        assert loaded[0] == (0, "truthful", [0.9, 0.1])
        assert loaded[1] == ("x", "falsified", None)
        first = json.loads(path.read_text().splitlines()[0])
        assert list(first) == ["id", "pred_label", "scores"]


class TestStore:
    def test_round_trip_sorted_and_normalized(self, tmp_path, rng):
        ids = [9, 2, 5]
        matrix = rng.standard_normal((3, 8)) * 3.0
        path = tmp_path / "v.mfeb"
        write_store("text", ids, matrix, path)
        modality, got_ids, got = read_store(path)
        assert modality == "text"
        assert got_ids.tolist() == [2, 5, 9]
        norms = np.linalg.norm(got.astype(np.float64), axis=1)
        assert np.all(np.abs(norms - 1.0) < 1e-4)
        # Row content follows its id through the sort.
        want = matrix[1] / np.linalg.norm(matrix[1])
        assert np.allclose(got[0], want, atol=1e-6)

    def test_header_layout(self, tmp_path):
        path = tmp_path / "v.mfeb"
        write_store("image", [7], np.ones((1, 4)), path)
        raw = path.read_bytes()
        magic, version, modality, dim, count = struct.unpack_from("<4sHBIQ", raw)
        assert (magic, version, modality, dim, count) == (b"MFEB", 1, 0, 4, 1)
        assert len(raw) == struct.calcsize("<4sHBIQ") + 8 + 16

    def test_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "v.mfeb"
        write_store("image", [1], np.ones((1, 4)), path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"NOPE"
        path.write_bytes(bytes(raw))
        with pytest.raises(BadStore) as err:
            read_store(path)
        assert "magic" in str(err.value)

    @pytest.mark.parametrize("cut", [3, 10, -5])
    def test_rejects_truncation(self, tmp_path, cut):
        path = tmp_path / "v.mfeb"
        write_store("text", [1, 2], np.ones((2, 4)), path)
        raw = path.read_bytes()
        path.write_bytes(raw[:cut] if cut > 0 else raw[:cut])
        with pytest.raises(BadStore):
            read_store(path)

    def test_rejects_trailing_garbage(self, tmp_path):
        path = tmp_path / "v.mfeb"
        write_store("text", [1], np.ones((1, 4)), path)
        path.write_bytes(path.read_bytes() + b"\x00" * 3)
        with pytest.raises(BadStore):
            read_store(path)

    def test_rejects_unsorted_ids_on_disk(self, tmp_path):
        path = tmp_path / "v.mfeb"
        write_store("text", [1, 2], np.eye(2, 4) + 1.0, path)
        raw = bytearray(path.read_bytes())
        header = struct.calcsize("<4sHBIQ")
        raw[header:header + 16] = struct.pack("<QQ", 2, 1)
        path.write_bytes(bytes(raw))
        with pytest.raises(BadStore) as err:
            read_store(path)
        assert "ascending" in str(err.value)

    @pytest.mark.parametrize("bad", ["duplicate", "nan", "zero", "shape"])
    def test_writer_rejects_bad_input(self, tmp_path, bad):
        path = tmp_path / "v.mfeb"
        if bad == "duplicate":
            args = ([1, 1], np.ones((2, 4)))
        elif bad == "nan":
            args = ([1], np.full((1, 4), np.nan))
        elif bad == "zero":
            args = ([1], np.zeros((1, 4)))
        else:
            args = ([1, 2], np.ones((3, 4)))
        with pytest.raises(ValueError):
            write_store("text", *args, path)

    def test_store_lookup_preserves_order(self, tmp_path, rng):
        matrix = rng.standard_normal((4, 6))
        path = tmp_path / "v.mfeb"
        write_store("image", [10, 20, 30, 40], matrix, path)
        _, ids, loaded = read_store(path)
        rows = store_lookup(ids, loaded, [30, 10])
        assert np.array_equal(rows[0], loaded[2])
        assert np.array_equal(rows[1], loaded[0])
        with pytest.raises(KeyError):
            store_lookup(ids, loaded, [99])
