"""Exception hierarchy shared by all pipeline stages."""

from __future__ import annotations


class MisinfoForgeError(Exception):
    """Base class for every error raised by this package."""


# --- corpus / annotation loading ---------------------------------------------

class MalformedRecord(MisinfoForgeError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class MissingField(MisinfoForgeError):
    def __init__(self, name: str, line: int | None = None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"missing field {name!r}{where}")
        self.name = name
        self.line = line


class DuplicateId(MisinfoForgeError):
    def __init__(self, record_id: int, line: int | None = None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"duplicate record id {record_id}{where}")
        self.record_id = record_id
        self.line = line


class UnknownRecord(MisinfoForgeError):
    def __init__(self, record_id: int):
        super().__init__(f"record id {record_id} not present in corpus")
        self.record_id = record_id


class SpanMismatch(MisinfoForgeError):
    def __init__(self, record_id: int, span, detail: str = ""):
        extra = f": {detail}" if detail else ""
        super().__init__(f"span {span} does not match caption of record {record_id}{extra}")
        self.record_id = record_id
        self.span = span


# --- embedding store ----------------------------------------------------------

class BadMagic(MisinfoForgeError):
    def __init__(self, found: bytes):
        super().__init__(f"not an embedding file (magic bytes {found!r})")
        self.found = found


class DimMismatch(MisinfoForgeError):
    def __init__(self, found: int, expected: int):
        super().__init__(f"dimension mismatch: found {found}, expected {expected}")
        self.found = found
        self.expected = expected


class TruncatedFile(MisinfoForgeError):
    def __init__(self, detail: str):
        super().__init__(f"truncated file: {detail}")
        self.detail = detail


class InvalidVector(MisinfoForgeError):
    def __init__(self, record_id: int, reason: str):
        super().__init__(f"vector for id {record_id} is invalid: {reason}")
        self.record_id = record_id
        self.reason = reason


# --- similarity queries ---------------------------------------------------------

class UnknownId(MisinfoForgeError):
    def __init__(self, record_id: int, where: str = ""):
        extra = f" in {where}" if where else ""
        super().__init__(f"unknown id {record_id}{extra}")
        self.record_id = record_id


class NoCandidate(MisinfoForgeError):
    def __init__(self, query_id: int, rank: int):
        super().__init__(f"no admissible candidate at rank {rank} for query {query_id}")
        self.query_id = query_id
        self.rank = rank


# --- entity swapping ------------------------------------------------------------

class NoAdmissibleReplacement(MisinfoForgeError):
    def __init__(self, record_id: int):
        super().__init__(f"no entity of record {record_id} has an admissible replacement")
        self.record_id = record_id


class InadmissiblePair(MisinfoForgeError):
    def __init__(self, id_a: int, id_x: int, reason: str):
        super().__init__(f"records {id_a} and {id_x} cannot be swapped: {reason}")
        self.id_a = id_a
        self.id_x = id_x
        self.reason = reason


class OverlappingSpans(MisinfoForgeError):
    def __init__(self, detail: str):
        super().__init__(f"overlapping replacement spans: {detail}")
        self.detail = detail


# --- dataset generation ----------------------------------------------------------

class MissingInput(MisinfoForgeError):
    def __init__(self, kind: str, input_name: str):
        super().__init__(f"strategy {kind} requires input {input_name!r}")
        self.kind = kind
        self.input_name = input_name


class EmptyClass(MisinfoForgeError):
    def __init__(self, name: str):
        super().__init__(f"class {name!r} is empty")
        self.name = name


class IoFailure(MisinfoForgeError):
    def __init__(self, path, reason: str):
        super().__init__(f"I/O failure on {path}: {reason}")
        self.path = path
        self.reason = reason


class UnsupportedFormat(MisinfoForgeError):
    def __init__(self, fmt: str):
        super().__init__(f"unsupported external format {fmt!r}")
        self.fmt = fmt


# --- evaluation -------------------------------------------------------------------

class UnknownLabel(MisinfoForgeError):
    def __init__(self, label):
        super().__init__(f"unknown label {label!r}")
        self.label = label


class MissingPrediction(MisinfoForgeError):
    def __init__(self, ids):
        ids = sorted(ids)
        shown = ", ".join(str(i) for i in ids[:10])
        more = f" (+{len(ids) - 10} more)" if len(ids) > 10 else ""
        super().__init__(f"no prediction for benchmark ids: {shown}{more}")
        self.ids = ids


class DuplicatePrediction(MisinfoForgeError):
    def __init__(self, item_id: int):
        super().__init__(f"multiple predictions for id {item_id}")
        self.item_id = item_id
