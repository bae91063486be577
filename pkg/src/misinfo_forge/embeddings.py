"""Dense embedding stores: binary persistence and a deterministic mock encoder.

File layout (all integers little-endian):

    magic   4 bytes  b"MFEB"
    version u16
    modality u8      0 = image, 1 = text
    dim     u32
    count   u64
    ids     count * u64
    matrix  count * dim * f32, row-major

Vectors are held L2-normalized so cosine similarity reduces to a dot
product. Dot products accumulate in float64; storage stays float32.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import BadMagic, DimMismatch, DuplicateId, InvalidVector, TruncatedFile, UnknownId
from .records import Corpus

MAGIC = b"MFEB"
FORMAT_VERSION = 1
NORM_TOLERANCE = 1e-4

_HEADER = struct.Struct("<4sHBIQ")


class Modality(str, Enum):
    IMAGE = "image"
    TEXT = "text"


_MODALITY_BYTE = {Modality.IMAGE: 0, Modality.TEXT: 1}
_BYTE_MODALITY = {v: k for k, v in _MODALITY_BYTE.items()}


@dataclass
class EmbeddingStore:
    """L2-normalized float32 vectors keyed by record id."""

    modality: Modality
    dim: int
    ids: np.ndarray          # uint64, one per row
    matrix: np.ndarray       # float32, shape (count, dim), C-contiguous
    _row_of: dict[int, int] = field(init=False, repr=False)

    def __post_init__(self):
        if self.matrix.shape != (len(self.ids), self.dim):
            raise ValueError(f"matrix shape {self.matrix.shape} inconsistent with ids/dim")
        self._row_of = {}
        for row, rec_id in enumerate(self.ids.tolist()):
            if rec_id in self._row_of:
                raise DuplicateId(rec_id)
            self._row_of[rec_id] = row

    @property
    def count(self) -> int:
        return len(self.ids)

    def __contains__(self, record_id: int) -> bool:
        return record_id in self._row_of

    def row_of(self, record_id: int) -> int:
        try:
            return self._row_of[record_id]
        except KeyError:
            raise UnknownId(record_id, f"{self.modality.value} store") from None

    def vector(self, record_id: int) -> np.ndarray:
        return self.matrix[self.row_of(record_id)]


def _normalize_rows(matrix: np.ndarray, ids: np.ndarray) -> np.ndarray:
    """L2-normalize rows, leaving rows already within tolerance untouched.

    Skipping in-tolerance rows keeps save(load(file)) byte-identical for
    files that were written normalized.
    """
    norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
    bad = ~np.isfinite(matrix).all(axis=1)
    if bad.any():
        raise InvalidVector(int(ids[int(np.argmax(bad))]), "non-finite component")
    zero = norms == 0.0
    if zero.any():
        raise InvalidVector(int(ids[int(np.argmax(zero))]), "zero vector cannot be normalized")
    off = np.abs(norms - 1.0) > NORM_TOLERANCE
    if off.any():
        scaled = matrix[off].astype(np.float64) / norms[off, None]
        matrix[off] = scaled.astype(np.float32)
    return matrix


def load_embeddings(path: str | Path, expected_dim: int | None = None) -> EmbeddingStore:
    """Read an embedding file, normalizing vectors in place after load."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise TruncatedFile(f"{len(data)} bytes is shorter than the header")
    magic, version, modality_byte, dim, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagic(magic)
    if version != FORMAT_VERSION:
        raise TruncatedFile(f"unsupported format version {version}")
    if modality_byte not in _BYTE_MODALITY:
        raise TruncatedFile(f"unknown modality byte {modality_byte}")
    if dim == 0:
        raise TruncatedFile("dimension must be positive")
    if expected_dim is not None and dim != expected_dim:
        raise DimMismatch(dim, expected_dim)
    expected_size = _HEADER.size + count * 8 + count * dim * 4
    if len(data) != expected_size:
        raise TruncatedFile(f"expected {expected_size} bytes, found {len(data)}")
    offset = _HEADER.size
    ids = np.frombuffer(data, dtype="<u8", count=count, offset=offset).copy()
    offset += count * 8
    matrix = (
        np.frombuffer(data, dtype="<f4", count=count * dim, offset=offset)
        .reshape(count, dim)
        .copy()
    )
    matrix = _normalize_rows(matrix, ids)
    return EmbeddingStore(modality=_BYTE_MODALITY[modality_byte], dim=dim, ids=ids, matrix=matrix)


def save_embeddings(store: EmbeddingStore, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(MAGIC, FORMAT_VERSION, _MODALITY_BYTE[store.modality], store.dim, store.count)
        )
        fh.write(store.ids.astype("<u8").tobytes())
        fh.write(store.matrix.astype("<f4").tobytes())


def _mock_key(seed: int, modality: Modality, record) -> bytes:
    # Text vectors key on caption content so duplicate captions share a
    # vector, mirroring a real encoder; image vectors key on the record id.
    head = b"mf-mock:%s:" % modality.value.encode() + struct.pack("<Q", seed & (2**64 - 1))
    if modality is Modality.TEXT:
        return head + record.caption.encode("utf-8")
    return head + struct.pack("<Q", record.id)


def mock_embed(corpus: Corpus, dim: int, modality: Modality, seed: int) -> EmbeddingStore:
    """Deterministic stand-in encoder.

    Each vector is a pure function of (seed, modality, record id or caption
    bytes), independent of corpus order and thread count. Rows are emitted
    in ascending id order.
    """
    if dim < 8:
        raise ValueError(f"mock embedding dim must be >= 8, got {dim}")
    records = sorted(corpus, key=lambda r: r.id)
    ids = np.array([r.id for r in records], dtype=np.uint64)
    matrix = np.empty((len(records), dim), dtype=np.float32)
    for row, rec in enumerate(records):
        digest = hashlib.blake2b(_mock_key(seed, modality, rec), digest_size=8).digest()
        rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest, "little")))
        vec = rng.standard_normal(dim).astype(np.float64)
        matrix[row] = (vec / np.linalg.norm(vec)).astype(np.float32)
    return EmbeddingStore(modality=modality, dim=dim, ids=ids, matrix=matrix)
