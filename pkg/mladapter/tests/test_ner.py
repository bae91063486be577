"""Entity tagging, the label map and annotation output."""

import pytest

from mmd_adapter import (
    BadSpan,
    HeuristicBackend,
    ModelLoadFailure,
    SpacyBackend,
    extract_entities,
    map_label,
    read_annotations,
    write_annotations,
)
from mmd_adapter.ner import LABEL_MAP, RawSpan

from conftest import VOCAB, make_corpus

KEPT = ["PERSON", "GPE", "LOC", "ORG", "DATE", "TIME", "EVENT", "NORP", "FAC"]
DROPPED = ["CARDINAL", "MONEY", "ORDINAL", "PERCENT", "QUANTITY", "LANGUAGE", "LAW", "PRODUCT", "WORK_OF_ART"]


class TestLabelMap:
    @pytest.mark.parametrize("label", KEPT)
    def test_kept_types_map_to_themselves(self, label):
        assert map_label(label) == label

    @pytest.mark.parametrize("label", DROPPED)
    def test_numeric_and_artifact_types_dropped(self, label):
        assert map_label(label) is None

    def test_unknown_label_dropped(self):
        assert map_label("MADE_UP") is None

    def test_table_is_total_over_both_sets(self):
        assert set(LABEL_MAP) == set(KEPT) | set(DROPPED)


class TestHeuristicBackend:
    def test_vocab_surfaces_get_their_type(self):
        be = HeuristicBackend(VOCAB)
        [spans] = be(["Alice Reed of Acme Labs spoke in Berlin on day 3."])
        got = {(s[3], s[0]) for s in spans}
        assert got == {("Alice Reed", "PERSON"), ("Acme Labs", "ORG"), ("Berlin", "GPE")}

    def test_offsets_match_slices(self):
        be = HeuristicBackend(VOCAB)
        text = "Bob Stone visited Lagos."
        [spans] = be([text])
        for label, start, end, surface in spans:
            assert text[start:end] == surface

    def test_unknown_capitalized_run_defaults_person(self):
        be = HeuristicBackend({})
        [spans] = be(["He met Zora Quill there."])
        assert [(s[0], s[3]) for s in spans] == [("PERSON", "Zora Quill")]

    def test_sentence_initial_unknown_is_skipped(self):
        be = HeuristicBackend({})
        [spans] = be(["Someone met nobody."])
        assert spans == []

    def test_rejects_unsupported_vocab_type(self):
        with pytest.raises(ValueError):
            HeuristicBackend({"Acme": "CARDINAL"})


class TestSpacyBackend:
    def test_missing_model_raises_load_failure(self):
        # The transformer pipeline is not installed in this environment.
        with pytest.raises(ModelLoadFailure) as err:
            SpacyBackend("en_core_web_trf")
        assert err.value.name == "en_core_web_trf"


class TestExtractEntities:
    def test_all_records_present_empty_allowed(self):
        records = make_corpus(6)
        records.append(type(records[0])(id=99, image_ref="x.jpg", caption="nothing here.", topic="topic-0", source="unit", split="train"))
        out = extract_entities(records, HeuristicBackend(VOCAB))
        assert set(out) == {r.id for r in records}
        assert out[99] == []
        assert all(s.etype in KEPT for spans in out.values() for s in spans)

    def test_spans_sorted_and_exact(self):
        records = make_corpus(8)
        out = extract_entities(records, HeuristicBackend(VOCAB))
        by_id = {r.id: r for r in records}
        for rid, spans in out.items():
            caption = by_id[rid].caption
            starts = [s.start for s in spans]
            assert starts == sorted(starts)
            for s in spans:
                assert caption[s.start:s.end] == s.surface

    def test_dropped_types_filtered(self):
        records = make_corpus(1)

        def backend(texts):
            return [[RawSpan("PERSON", 0, 10, texts[0][0:10]), RawSpan("CARDINAL", 41, 42, texts[0][41:42])]]

        out = extract_entities(records, backend)
        assert [s.etype for s in out[0]] == ["PERSON"]

    def test_bad_slice_raises(self):
        records = make_corpus(1)

        def backend(texts):
            return [[RawSpan("PERSON", 0, 5, "WRONG")]]

        with pytest.raises(BadSpan) as err:
            extract_entities(records, backend)
        assert err.value.record_id == 0

    def test_out_of_bounds_raises(self):
        records = make_corpus(1)

        def backend(texts):
            return [[RawSpan("PERSON", 0, 10_000, "x")]]

        with pytest.raises(BadSpan):
            extract_entities(records, backend)

    def test_overlap_raises(self):
        records = make_corpus(1)
        caption = records[0].caption

        def backend(texts):
            return [[RawSpan("PERSON", 0, 10, caption[0:10]), RawSpan("ORG", 5, 12, caption[5:12])]]

        with pytest.raises(BadSpan) as err:
            extract_entities(records, backend)
        assert "overlap" in str(err.value)

    def test_document_count_mismatch_raises(self):
        with pytest.raises(BadSpan):
            extract_entities(make_corpus(3), lambda texts: [[]])

    def test_round_trips_through_annotation_file(self, tmp_path):
        records = make_corpus(10)
        out = extract_entities(records, HeuristicBackend(VOCAB))
        path = tmp_path / "entities.jsonl"
        write_annotations(out, path)
        loaded = read_annotations(path)
        assert loaded == {rid: spans for rid, spans in out.items() if spans}
