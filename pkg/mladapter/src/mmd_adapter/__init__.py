"""ML adapter for the misinfo-forge file formats.

Feature extraction with frozen encoders, caption entity tagging, and a
transformer detector trained over a fixed 16-configuration grid. All
exchange with the dataset tooling happens through its file formats.
"""

from .detector import MODALITIES, DtTransformer
from .encoders import (
    ENCODER_DIMS,
    ClipBackend,
    EncoderSpec,
    FakeBackend,
    encode_captions,
    extract_embeddings,
    resolve_image,
)
from .errors import (
    AdapterError,
    BadSpan,
    BadStore,
    DivergedTraining,
    EncoderLoadFailure,
    MalformedLine,
    MissingImage,
    ModelLoadFailure,
    ShapeMismatch,
)
from .features import assemble_inference, assemble_split, label_index
from .formats import (
    BINARY_LABELS,
    TERNARY_LABELS,
    BenchmarkItem,
    CorpusRecord,
    DatasetRow,
    EntitySpanRec,
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
from .ner import LABEL_MAP, HeuristicBackend, SpacyBackend, extract_entities, map_label
from .synthetic import linear_probe_accuracy, make_planted_task
from .training import (
    GRID_HEADS,
    GRID_LAYERS,
    GRID_LRS,
    GRID_WIDTHS,
    LABELS_BY_CLASSES,
    ArraySplit,
    ConfigLog,
    DetectorConfig,
    EpochLog,
    TrainResult,
    build_model,
    default_grid,
    evaluate_accuracy,
    grid_log_json,
    load_checkpoint,
    predict,
    run_grid,
    save_checkpoint,
    train_one,
)

__all__ = [
    "AdapterError",
    "ArraySplit",
    "BINARY_LABELS",
    "BadSpan",
    "BadStore",
    "BenchmarkItem",
    "ClipBackend",
    "ConfigLog",
    "CorpusRecord",
    "DatasetRow",
    "DetectorConfig",
    "DivergedTraining",
    "DtTransformer",
    "ENCODER_DIMS",
    "EncoderLoadFailure",
    "EncoderSpec",
    "EntitySpanRec",
    "EpochLog",
    "FakeBackend",
    "GRID_HEADS",
    "GRID_LAYERS",
    "GRID_LRS",
    "GRID_WIDTHS",
    "HeuristicBackend",
    "LABELS_BY_CLASSES",
    "LABEL_MAP",
    "MODALITIES",
    "MalformedLine",
    "MissingImage",
    "ModelLoadFailure",
    "ShapeMismatch",
    "SpacyBackend",
    "TERNARY_LABELS",
    "TrainResult",
    "assemble_inference",
    "assemble_split",
    "build_model",
    "default_grid",
    "encode_captions",
    "evaluate_accuracy",
    "extract_embeddings",
    "extract_entities",
    "grid_log_json",
    "label_index",
    "linear_probe_accuracy",
    "load_checkpoint",
    "make_planted_task",
    "map_label",
    "predict",
    "read_annotations",
    "read_benchmark",
    "read_corpus",
    "read_dataset",
    "read_predictions",
    "read_store",
    "resolve_image",
    "run_grid",
    "save_checkpoint",
    "train_one",
    "write_annotations",
    "write_benchmark",
    "write_corpus",
    "write_predictions",
    "write_store",
]
