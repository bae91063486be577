"""misinfo-forge: synthetic misinformation dataset engine and eval harness."""

from .adapters import ExternalFormat, import_external
from .embeddings import EmbeddingStore, Modality, load_embeddings, mock_embed, save_embeddings
from .engine import (
    KIND_TAG,
    GenBalance,
    GeneratedPair,
    HybridBalance,
    HybridSpec,
    Label,
    Manifest,
    Provenance,
    Strategy,
    StrategyKind,
    combine_hybrid,
    dataset_stats,
    emit_dataset,
    generate,
    load_dataset,
    manifest_path,
    render_stats,
)
from .errors import MisinfoForgeError
from .evaluation import (
    BinaryLabel,
    EvalItem,
    EvalReport,
    Prediction,
    binarize,
    load_benchmark,
    load_predictions,
    render_report,
    save_benchmark,
    save_predictions,
    score,
)
from .records import (
    AnnotatedCaption,
    Corpus,
    EntitySpan,
    EntityType,
    NewsRecord,
    Split,
    load_annotations,
    load_corpus,
    save_annotations,
    save_corpus,
)
from .seeds import mix64, per_record_seed
from .similarity import (
    CandidateFilter,
    SimilarityIndex,
    TopicIndex,
    TopKCache,
    build_topic_index,
    compute_topk_cache,
    cosine,
    load_topk_cache,
    save_topk_cache,
)
from .swaps import (
    EntityPool,
    Replacement,
    SwapResult,
    apply_replacements,
    build_entity_pool,
    pairwise_swap,
    random_swap,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotatedCaption",
    "BinaryLabel",
    "CandidateFilter",
    "Corpus",
    "EmbeddingStore",
    "EntityPool",
    "EntitySpan",
    "EntityType",
    "EvalItem",
    "EvalReport",
    "ExternalFormat",
    "GenBalance",
    "GeneratedPair",
    "HybridBalance",
    "HybridSpec",
    "KIND_TAG",
    "Label",
    "Manifest",
    "MisinfoForgeError",
    "Modality",
    "NewsRecord",
    "Prediction",
    "Provenance",
    "Replacement",
    "SimilarityIndex",
    "Split",
    "Strategy",
    "StrategyKind",
    "SwapResult",
    "TopKCache",
    "TopicIndex",
    "apply_replacements",
    "binarize",
    "build_entity_pool",
    "build_topic_index",
    "combine_hybrid",
    "compute_topk_cache",
    "cosine",
    "dataset_stats",
    "emit_dataset",
    "generate",
    "import_external",
    "load_annotations",
    "load_benchmark",
    "load_corpus",
    "load_dataset",
    "load_embeddings",
    "load_predictions",
    "load_topk_cache",
    "manifest_path",
    "mix64",
    "mock_embed",
    "pairwise_swap",
    "per_record_seed",
    "random_swap",
    "render_report",
    "render_stats",
    "save_annotations",
    "save_benchmark",
    "save_corpus",
    "save_embeddings",
    "save_predictions",
    "save_topk_cache",
    "score",
]
