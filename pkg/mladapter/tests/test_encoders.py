"""Encoder specs, the fake backend and the extraction pipeline."""

import sys
import types

import numpy as np
import pytest

from mmd_adapter import (
    EncoderLoadFailure,
    EncoderSpec,
    FakeBackend,
    MissingImage,
    ShapeMismatch,
    encode_captions,
    extract_embeddings,
    read_store,
    resolve_image,
)
from mmd_adapter.encoders import ClipBackend

from conftest import make_corpus


class TestEncoderSpec:
    @pytest.mark.parametrize("name,dim", [("ViT-B/32", 512), ("ViT-L/14", 768)])
    def test_known_encoders(self, name, dim):
        spec = EncoderSpec.from_name(name)
        assert spec.dim == dim
        assert spec.frozen is True

    def test_wrong_dim_rejected(self):
        with pytest.raises(ValueError):
            EncoderSpec(name="ViT-B/32", dim=768)

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError):
            EncoderSpec.from_name("ResNet-50")


class TestFakeBackend:
    def test_unit_norm_and_deterministic(self):
        be = FakeBackend(dim=24)
        a = be.encode_texts(["hello", "world"])
        b = be.encode_texts(["hello", "world"])
        assert np.array_equal(a, b)
        assert np.allclose(np.linalg.norm(a, axis=1), 1.0, atol=1e-6)

    def test_batch_composition_irrelevant(self):
        be = FakeBackend(dim=16)
        alone = be.encode_images(["x.jpg"])
        grouped = be.encode_images(["y.jpg", "x.jpg"])
        assert np.array_equal(alone[0], grouped[1])

    def test_modalities_do_not_collide(self):
        be = FakeBackend(dim=16)
        assert not np.array_equal(be.encode_images(["same"]), be.encode_texts(["same"]))

    def test_seed_changes_vectors(self):
        a = FakeBackend(dim=16, seed=0).encode_texts(["t"])
        b = FakeBackend(dim=16, seed=1).encode_texts(["t"])
        assert not np.array_equal(a, b)


class TestResolveImage:
    def test_finds_relative_ref(self, tmp_path):
        (tmp_path / "images").mkdir()
        target = tmp_path / "images" / "a.jpg"
        target.write_bytes(b"\xff")
        assert resolve_image(tmp_path, "images/a.jpg") == target

    def test_missing_raises(self, tmp_path):
        with pytest.raises(MissingImage) as err:
            resolve_image(tmp_path, "images/nope.jpg")
        assert err.value.ref == "images/nope.jpg"

    def test_absolute_ref_ignores_root(self, tmp_path):
        target = tmp_path / "b.jpg"
        target.write_bytes(b"\xff")
        assert resolve_image("/elsewhere", str(target)) == target


class TestClipBackendLoading:
    def test_import_failure_becomes_load_failure(self, monkeypatch):
        monkeypatch.setitem(sys.modules, "transformers", types.ModuleType("transformers"))
        with pytest.raises(EncoderLoadFailure) as err:
            ClipBackend(EncoderSpec.from_name("ViT-B/32"))
        assert err.value.name == "ViT-B/32"

    def test_weight_fetch_failure_becomes_load_failure(self, monkeypatch):
        stub = types.ModuleType("transformers")

        class Boom:
            @staticmethod
            def from_pretrained(name):
                raise OSError("no weights here")

        stub.CLIPModel = Boom
        stub.CLIPProcessor = Boom
        monkeypatch.setitem(sys.modules, "transformers", stub)
        with pytest.raises(EncoderLoadFailure) as err:
            ClipBackend(EncoderSpec.from_name("ViT-L/14"))
        assert "no weights" in str(err.value)


class TestExtraction:
    def test_writes_id_keyed_stores(self, tmp_path):
        records = make_corpus(10)
        be = FakeBackend(dim=12)
        count, dim = extract_embeddings(records, be, tmp_path / "i.mfeb", tmp_path / "t.mfeb")
        assert (count, dim) == (10, 12)
        modality, ids, matrix = read_store(tmp_path / "i.mfeb")
        assert modality == "image"
        assert ids.tolist() == [r.id for r in records]
        assert matrix.shape == (10, 12)
        modality, _, _ = read_store(tmp_path / "t.mfeb")
        assert modality == "text"

    def test_rows_keyed_by_content(self, tmp_path):
        records = make_corpus(6)
        be = FakeBackend(dim=12)
        extract_embeddings(records, be, tmp_path / "i.mfeb", tmp_path / "t.mfeb")
        _, ids, matrix = read_store(tmp_path / "t.mfeb")
        row = matrix[list(ids).index(records[3].id)]
        assert np.allclose(row, be.encode_texts([records[3].caption])[0], atol=1e-6)

    def test_rerun_is_reproducible(self, tmp_path):
        # Determinism contract: a second pass must agree to within 1e-5.
        records = make_corpus(8)
        be = FakeBackend(dim=16)
        extract_embeddings(records, be, tmp_path / "i1.mfeb", tmp_path / "t1.mfeb")
        extract_embeddings(records, be, tmp_path / "i2.mfeb", tmp_path / "t2.mfeb")
        for a, b in [("i1.mfeb", "i2.mfeb"), ("t1.mfeb", "t2.mfeb")]:
            _, _, ma = read_store(tmp_path / a)
            _, _, mb = read_store(tmp_path / b)
            assert float(np.max(np.abs(ma - mb))) <= 1e-5

    def test_backend_shape_checked(self, tmp_path):
        class Wonky:
            dim = 8

            def encode_images(self, refs):
                return np.ones((len(refs), 4), dtype=np.float32)

            def encode_texts(self, texts):
                return np.ones((len(texts), 8), dtype=np.float32)

        with pytest.raises(ShapeMismatch):
            extract_embeddings(make_corpus(3), Wonky(), tmp_path / "i.mfeb", tmp_path / "t.mfeb")

    def test_encode_captions_is_ordinal_keyed(self, tmp_path):
        be = FakeBackend(dim=12)
        n = encode_captions(["one", "two", "three"], be, tmp_path / "c.mfeb")
        assert n == 3
        modality, ids, matrix = read_store(tmp_path / "c.mfeb")
        assert modality == "text"
        assert ids.tolist() == [0, 1, 2]
        assert np.allclose(matrix[1], be.encode_texts(["two"])[0], atol=1e-6)
