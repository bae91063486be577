"""Feature assembly from dataset rows and stores."""

import numpy as np
import pytest

from mmd_adapter import (
    BenchmarkItem,
    DatasetRow,
    ShapeMismatch,
    assemble_inference,
    assemble_split,
    label_index,
)


def _stores(n_records=4, n_captions=3, dim=6, seed=0):
    rng = np.random.default_rng(seed)
    image_ids = np.array([10, 20, 30, 40][:n_records], dtype=np.uint64)
    image = rng.standard_normal((n_records, dim)).astype(np.float32)
    cap_ids = np.arange(n_captions, dtype=np.uint64)
    captions = rng.standard_normal((n_captions, dim)).astype(np.float32)
    return (image_ids, image), (cap_ids, captions)


class TestLabelIndex:
    @pytest.mark.parametrize(
        "label,classes,want",
        [("truthful", 2, 0), ("ooc", 2, 1), ("nei", 2, 1), ("falsified", 2, 1),
         ("truthful", 3, 0), ("ooc", 3, 1), ("nei", 3, 2)],
    )
    def test_mapping(self, label, classes, want):
        assert label_index(label, classes) == want

    def test_falsified_invalid_for_three_classes(self):
        with pytest.raises(ValueError):
            label_index("falsified", 3)

    def test_unknown_label(self):
        with pytest.raises(ValueError):
            label_index("maybe", 2)


class TestAssemble:
    def test_rows_follow_image_ids_and_ordinals(self):
        image_store, caption_store = _stores()
        rows = [
            DatasetRow(image_id=30, caption="a", label="truthful"),
            DatasetRow(image_id=10, caption="b", label="ooc"),
            DatasetRow(image_id=30, caption="c", label="nei"),
        ]
        split = assemble_split(rows, image_store, caption_store, classes=2)
        assert np.array_equal(split.image[0], image_store[1][2])
        assert np.array_equal(split.image[1], image_store[1][0])
        assert np.array_equal(split.image[2], image_store[1][2])
        assert np.array_equal(split.text, caption_store[1])
        assert split.labels.tolist() == [0, 1, 1]

    def test_unknown_image_id(self):
        image_store, caption_store = _stores()
        rows = [DatasetRow(image_id=99, caption="a", label="truthful")] * 3
        with pytest.raises(KeyError):
            assemble_split(rows, image_store, caption_store, classes=2)

    def test_caption_store_size_mismatch(self):
        image_store, caption_store = _stores(n_captions=2)
        rows = [DatasetRow(image_id=10, caption="a", label="truthful")] * 3
        with pytest.raises(ShapeMismatch):
            assemble_split(rows, image_store, caption_store, classes=2)

    def test_caption_store_must_be_ordinal(self):
        image_store, (cap_ids, cap_matrix) = _stores()
        shifted = cap_ids + 5
        rows = [DatasetRow(image_id=10, caption="a", label="truthful")] * 3
        with pytest.raises(ShapeMismatch):
            assemble_split(rows, image_store, (shifted, cap_matrix), classes=2)

    def test_inference_assembly(self):
        image_store, caption_store = _stores()
        items = [
            BenchmarkItem(id=0, image_id=20, caption="x", true_label="truthful"),
            BenchmarkItem(id=1, image_id=40, caption="y", true_label="ooc"),
            BenchmarkItem(id=2, image_id=20, caption="z", true_label="nei"),
        ]
        image_rows, text_rows = assemble_inference(items, image_store, caption_store)
        assert np.array_equal(image_rows[1], image_store[1][3])
        assert np.array_equal(text_rows, caption_store[1])
