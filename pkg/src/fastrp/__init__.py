"""FastRP graph embeddings via very sparse random projection."""

from .engine import (
    FastRpConfig,
    PowerEmbeddings,
    compute_normalizer,
    compute_power_embeddings,
    dense_oracle_embed,
    fastrp_embed,
    merge_weighted,
    set_threads,
    sweep,
    sweep_grid,
)
from .errors import FastRPError, GraphError, NumericError, ParseError, QueryError, ShapeError
from .evaluate import (
    ClassificationReport,
    KnnResult,
    LabelSet,
    knn_query,
    predict_and_score,
    split_train_test,
    train_ovr_logreg,
)
from .graph import (
    CsrGraph,
    EdgeList,
    apply_transition,
    build_csr,
    generate_erdos_renyi,
    parse_edge_list,
    transition_power_dense,
)
from .projection import (
    ProjectionKind,
    ProjectionMatrix,
    ProjectionSpec,
    default_sparsity,
    sample_gaussian,
    sample_very_sparse,
)

__version__ = "0.1.0"

__all__ = [
    "apply_transition",
    "build_csr",
    "ClassificationReport",
    "compute_normalizer",
    "compute_power_embeddings",
    "CsrGraph",
    "default_sparsity",
    "dense_oracle_embed",
    "EdgeList",
    "fastrp_embed",
    "FastRpConfig",
    "FastRPError",
    "generate_erdos_renyi",
    "GraphError",
    "knn_query",
    "KnnResult",
    "LabelSet",
    "merge_weighted",
    "NumericError",
    "parse_edge_list",
    "ParseError",
    "PowerEmbeddings",
    "predict_and_score",
    "ProjectionKind",
    "ProjectionMatrix",
    "ProjectionSpec",
    "QueryError",
    "sample_gaussian",
    "sample_very_sparse",
    "set_threads",
    "ShapeError",
    "split_train_test",
    "sweep",
    "sweep_grid",
    "train_ovr_logreg",
    "transition_power_dense",
]
