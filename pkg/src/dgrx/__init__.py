"""Relation extraction with a graph-convolution head over dependency parses.

The pipeline: mask entity spans with reserved tokens, obtain one contextual
vector per word from a pluggable provider, run an L-layer GCN over the parse
tree's adjacency, max-pool sentence/subject/object spans, and classify the
concatenated representation. Training uses hand-derived analytic gradients
on a replayable tape; scoring excludes the negative label from both micro
numerators and buckets results by entity distance.
"""

from .corpus import CorpusSplit, attach_parses, load_conllu, load_tacred_json, save_tacred_json
from .data_model import (
    DependencyGraph,
    EncodedSentence,
    Example,
    ModelConfig,
    ModelParams,
    NerType,
    Provenance,
    Registry,
    RelationLabel,
    validate_example,
    validate_heads,
)
from .encoders import (
    CacheProvider,
    EmbeddingCache,
    HashedProvider,
    RemoteProvider,
    cache_read,
    cache_write,
    hashed_encode,
    remote_encode,
)
from .evaluation import (
    DEFAULT_BUCKETS,
    EvalReport,
    Score,
    bucket_report,
    entity_distance,
    evaluate_predictions,
    parse_buckets,
    score,
)
from .graph import build_graph, normalize_adjacency
from .model import (
    classify,
    final_rep,
    forward_example,
    gcn_layer,
    init_params,
    load_checkpoint,
    pool_features,
    predict,
    run_gcn,
    save_checkpoint,
)
from .numerics import Tape, Tensor, grad_check, softmax
from .preprocess import (
    AlignmentMap,
    MaskedSentence,
    MaskRegistry,
    align_subwords,
    example_stream_seed,
    mask_entities,
    project_states,
)
from .synthetic import make_corpus, synth_registry
from .training import (
    EpochStats,
    FitResult,
    OptimizerState,
    PreparedExample,
    ProviderConfig,
    TrainingConfig,
    fit,
    predict_split,
    prepare_split,
    train_epoch,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentMap",
    "CacheProvider",
    "CorpusSplit",
    "DEFAULT_BUCKETS",
    "DependencyGraph",
    "EmbeddingCache",
    "EncodedSentence",
    "EpochStats",
    "EvalReport",
    "Example",
    "FitResult",
    "HashedProvider",
    "MaskRegistry",
    "MaskedSentence",
    "ModelConfig",
    "ModelParams",
    "NerType",
    "OptimizerState",
    "PreparedExample",
    "Provenance",
    "ProviderConfig",
    "Registry",
    "RelationLabel",
    "RemoteProvider",
    "Score",
    "Tape",
    "Tensor",
    "TrainingConfig",
    "align_subwords",
    "attach_parses",
    "bucket_report",
    "build_graph",
    "cache_read",
    "cache_write",
    "classify",
    "entity_distance",
    "evaluate_predictions",
    "example_stream_seed",
    "final_rep",
    "fit",
    "forward_example",
    "gcn_layer",
    "grad_check",
    "hashed_encode",
    "init_params",
    "load_checkpoint",
    "load_conllu",
    "load_tacred_json",
    "make_corpus",
    "mask_entities",
    "normalize_adjacency",
    "parse_buckets",
    "pool_features",
    "predict",
    "predict_split",
    "prepare_split",
    "project_states",
    "remote_encode",
    "run_gcn",
    "save_checkpoint",
    "save_tacred_json",
    "score",
    "softmax",
    "synth_registry",
    "train_epoch",
    "validate_example",
    "validate_heads",
]
