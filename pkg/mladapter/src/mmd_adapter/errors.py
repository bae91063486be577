"""Typed errors raised by the adapter."""

from __future__ import annotations


class AdapterError(Exception):
    """Base class for all errors raised by this package."""


class MalformedLine(AdapterError):
    """A JSONL line failed to parse or is missing a required field."""

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class BadStore(AdapterError):
    """An embedding store file has an invalid header or truncated body."""

    def __init__(self, path, reason: str):
        self.path = str(path)
        self.reason = reason
        super().__init__(f"{path}: {reason}")


class MissingImage(AdapterError):
    """An image referenced by the corpus could not be found on disk."""

    def __init__(self, ref: str):
        self.ref = ref
        super().__init__(f"image not found: {ref}")


class EncoderLoadFailure(AdapterError):
    """A pretrained encoder could not be loaded."""

    def __init__(self, name: str, reason: str):
        self.name = name
        self.reason = reason
        super().__init__(f"could not load encoder {name}: {reason}")


class ModelLoadFailure(AdapterError):
    """A tagging model could not be loaded."""

    def __init__(self, name: str, reason: str):
        self.name = name
        self.reason = reason
        super().__init__(f"could not load model {name}: {reason}")


class BadSpan(AdapterError):
    """A tagger produced a span that does not match its caption slice."""

    def __init__(self, record_id: int, reason: str):
        self.record_id = record_id
        self.reason = reason
        super().__init__(f"record {record_id}: {reason}")


class ShapeMismatch(AdapterError):
    """Feature arrays disagree with the expected dimensions."""


class DivergedTraining(AdapterError):
    """Training produced a non-finite loss."""

    def __init__(self, config_label: str, epoch: int):
        self.config_label = config_label
        self.epoch = epoch
        super().__init__(f"non-finite loss at epoch {epoch} ({config_label})")
