"""Frozen feature encoders and the embedding extraction pipeline.

Two backends implement the same protocol: ``ClipBackend`` wraps a
pretrained dual encoder loaded through ``transformers`` (an optional
dependency), and ``FakeBackend`` produces deterministic hash-seeded unit
vectors so pipelines can be exercised without model weights. Either way
extraction is deterministic: re-running over the same corpus reproduces
embeddings to within float32 round-off.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .errors import EncoderLoadFailure, MissingImage, ShapeMismatch
from .formats import CorpusRecord, write_store

ENCODER_DIMS = {
    "ViT-B/32": 512,
    "ViT-L/14": 768,
}

_HUB_NAMES = {
    "ViT-B/32": "openai/clip-vit-base-patch32",
    "ViT-L/14": "openai/clip-vit-large-patch14",
}

_BATCH = 64


@dataclass(frozen=True)
class EncoderSpec:
    """Names a supported encoder; the weights are always kept frozen."""

    name: str
    dim: int

    def __post_init__(self):
        if self.name not in ENCODER_DIMS:
            raise ValueError(f"unknown encoder {self.name!r}; supported: {sorted(ENCODER_DIMS)}")
        if self.dim != ENCODER_DIMS[self.name]:
            raise ValueError(f"{self.name} produces {ENCODER_DIMS[self.name]}-dim features, not {self.dim}")

    @property
    def frozen(self) -> bool:
        return True

    @classmethod
    def from_name(cls, name: str) -> "EncoderSpec":
        if name not in ENCODER_DIMS:
            raise ValueError(f"unknown encoder {name!r}; supported: {sorted(ENCODER_DIMS)}")
        return cls(name=name, dim=ENCODER_DIMS[name])


class FeatureBackend(Protocol):
    dim: int

    def encode_images(self, refs: Sequence[str]) -> np.ndarray: ...

    def encode_texts(self, texts: Sequence[str]) -> np.ndarray: ...


def resolve_image(root: str | Path | None, ref: str) -> Path:
    """Resolve an image reference against a root directory.

    Absolute refs are used as-is; anything else is joined to ``root``.
    """
    path = Path(ref)
    if not path.is_absolute() and root is not None:
        path = Path(root) / path
    if not path.is_file():
        raise MissingImage(ref)
    return path


class FakeBackend:
    """Deterministic stand-in encoder for tests and dry runs.

    Vectors are unit-norm and keyed by content hash, so equal inputs map
    to equal rows regardless of batch composition.
    """

    def __init__(self, dim: int = 32, seed: int = 0):
        if dim < 4:
            raise ValueError("dim must be at least 4")
        self.dim = dim
        self.seed = seed

    def _unit(self, key: bytes) -> np.ndarray:
        digest = hashlib.blake2b(key, digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little") ^ self.seed)
        vec = rng.standard_normal(self.dim)
        return (vec / np.linalg.norm(vec)).astype(np.float32)

    def encode_images(self, refs: Sequence[str]) -> np.ndarray:
        return np.stack([self._unit(b"image\x00" + r.encode("utf-8")) for r in refs])

    def encode_texts(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([self._unit(b"text\x00" + t.encode("utf-8")) for t in texts])


class ClipBackend:
    """Pretrained dual-encoder backend; weights stay frozen throughout."""

    def __init__(self, spec: EncoderSpec, images_root: str | Path | None = None):
        self.spec = spec
        self.dim = spec.dim
        self.images_root = images_root
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except Exception as exc:  # pragma: no cover - depends on env
            raise EncoderLoadFailure(spec.name, f"transformers unavailable: {exc}") from None
        try:
            hub = _HUB_NAMES[spec.name]
            self._model = CLIPModel.from_pretrained(hub)
            self._processor = CLIPProcessor.from_pretrained(hub)
        except Exception as exc:  # pragma: no cover - needs model weights
            raise EncoderLoadFailure(spec.name, str(exc)) from None
        self._torch = torch
        self._model.eval()
        for param in self._model.parameters():
            param.requires_grad_(False)

    def _open(self, ref: str):
        from PIL import Image

        path = resolve_image(self.images_root, ref)
        try:
            return Image.open(path).convert("RGB")
        except OSError:
            raise MissingImage(ref) from None

    def encode_images(self, refs: Sequence[str]) -> np.ndarray:  # pragma: no cover - needs weights
        images = [self._open(r) for r in refs]
        inputs = self._processor(images=images, return_tensors="pt")
        with self._torch.no_grad():
            feats = self._model.get_image_features(**inputs)
        feats = feats / feats.norm(dim=-1, keepdim=True)
        return feats.cpu().numpy().astype(np.float32)

    def encode_texts(self, texts: Sequence[str]) -> np.ndarray:  # pragma: no cover - needs weights
        inputs = self._processor(text=list(texts), return_tensors="pt", padding=True, truncation=True)
        with self._torch.no_grad():
            feats = self._model.get_text_features(**inputs)
        feats = feats / feats.norm(dim=-1, keepdim=True)
        return feats.cpu().numpy().astype(np.float32)


def _encode_batched(encode, inputs: Sequence[str], dim: int, what: str) -> np.ndarray:
    out = np.empty((len(inputs), dim), dtype=np.float32)
    for start in range(0, len(inputs), _BATCH):
        chunk = inputs[start : start + _BATCH]
        rows = np.asarray(encode(chunk), dtype=np.float32)
        if rows.shape != (len(chunk), dim):
            raise ShapeMismatch(f"{what} backend returned shape {rows.shape}, expected {(len(chunk), dim)}")
        out[start : start + len(chunk)] = rows
    return out


def extract_embeddings(
    records: Sequence[CorpusRecord],
    backend: FeatureBackend,
    image_out: str | Path,
    text_out: str | Path,
) -> tuple[int, int]:
    """Encode every record's image and caption into two id-keyed stores.

    Rows are keyed by record id in both stores. Returns (count, dim).
    """
    recs = sorted(records, key=lambda r: r.id)
    ids = [r.id for r in recs]
    image_rows = _encode_batched(backend.encode_images, [r.image_ref for r in recs], backend.dim, "image")
    text_rows = _encode_batched(backend.encode_texts, [r.caption for r in recs], backend.dim, "text")
    write_store("image", ids, image_rows, image_out)
    write_store("text", ids, text_rows, text_out)
    return len(recs), backend.dim


def encode_captions(texts: Sequence[str], backend: FeatureBackend, out: str | Path) -> int:
    """Encode free-standing captions into a text store keyed by ordinal.

    Dataset and benchmark rows carry rewritten captions that never appear
    in the per-record corpus stores, so their features are keyed by row
    number (0-based) instead of record id.
    """
    rows = _encode_batched(backend.encode_texts, list(texts), backend.dim, "text")
    write_store("text", list(range(len(texts))), rows, out)
    return len(texts)
