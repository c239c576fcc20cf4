"""Projection of normalized datapoints into a 2D/3D map."""

from hydromon.dimred.curve import fit_curve
from hydromon.dimred.embedding import (
    Embedding,
    EmbeddingConfig,
    embed,
    export_embedding_csv,
    fit_embedding,
    load_embedding,
    save_embedding,
    transform_new,
)
from hydromon.dimred.neighbors import (
    FuzzyGraph,
    build_fuzzy_graph,
    fuzzy_union,
    knn_graph,
    knn_query,
    membership_weights,
    smooth_knn,
)
from hydromon.dimred.pca import DimredError, PcaModel, pca_fit
from hydromon.dimred.quality import trustworthiness

__all__ = [
    "DimredError",
    "Embedding",
    "EmbeddingConfig",
    "FuzzyGraph",
    "PcaModel",
    "build_fuzzy_graph",
    "embed",
    "export_embedding_csv",
    "fit_curve",
    "fit_embedding",
    "fuzzy_union",
    "knn_graph",
    "knn_query",
    "load_embedding",
    "membership_weights",
    "pca_fit",
    "save_embedding",
    "smooth_knn",
    "transform_new",
    "trustworthiness",
]
