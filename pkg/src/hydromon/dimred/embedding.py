"""Neighbor-graph embedding into 2 or 3 dimensions.

Pipeline: fuzzy graph -> spectral-like initialization -> stochastic
attraction/repulsion refinement. New timestamps are placed afterwards
against frozen training coordinates so the map stays stable as data grows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from hydromon.dimred.curve import fit_curve
from hydromon.dimred.neighbors import (
    FuzzyGraph,
    build_fuzzy_graph,
    knn_query,
    membership_weights,
    smooth_knn,
)
from hydromon.dimred.pca import DimredError
from hydromon.dimred.sgd import optimize_layout, optimize_new_points
from hydromon.ingest import FeatureMatrix, format_timestamp

_METRICS = ("euclidean", "manhattan")
_INITS = ("spectral-like", "random")
_SPECTRAL_MAX_ITER = 500
_SPECTRAL_TOL = 1e-10
_INIT_SCALE = 10.0
_TRANSFORM_EPOCHS = 30
_GAMMA = 1.0
_FORMAT = "embedding"
_FORMAT_VERSION = 1


@dataclass
class EmbeddingConfig:
    n_neighbors: int = 15
    min_dist: float = 0.1
    n_epochs: int = 200
    metric: str = "euclidean"
    init: str = "spectral-like"
    out_dims: int = 2
    seed: int = 42
    negative_sample_rate: int = 5

    def __post_init__(self):
        if self.n_neighbors < 2:
            raise DimredError(f"n_neighbors must be >= 2, got {self.n_neighbors}")
        if not 0.0 < self.min_dist < 1.0:
            raise DimredError(f"min_dist must lie in (0, 1), got {self.min_dist}")
        if self.n_epochs < 0:
            raise DimredError(f"n_epochs must be >= 0, got {self.n_epochs}")
        if self.metric not in _METRICS:
            raise DimredError(f"metric must be one of {_METRICS}, got {self.metric!r}")
        if self.init not in _INITS:
            raise DimredError(f"init must be one of {_INITS}, got {self.init!r}")
        if self.out_dims not in (2, 3):
            raise DimredError(f"out_dims must be 2 or 3, got {self.out_dims}")
        if self.negative_sample_rate < 1:
            raise DimredError(
                f"negative_sample_rate must be >= 1, got {self.negative_sample_rate}"
            )

    def to_dict(self) -> dict:
        return {
            "n_neighbors": self.n_neighbors,
            "min_dist": self.min_dist,
            "n_epochs": self.n_epochs,
            "metric": self.metric,
            "init": self.init,
            "out_dims": self.out_dims,
            "seed": self.seed,
            "negative_sample_rate": self.negative_sample_rate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EmbeddingConfig":
        return cls(**d)


@dataclass
class Embedding:
    coordinates: np.ndarray   # (n, out_dims)
    a: float
    b: float
    graph: FuzzyGraph
    config: EmbeddingConfig
    train_data: np.ndarray | None = None
    signals: list[str] | None = None
    timestamps: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.coordinates.shape[0] != self.graph.n_points:
            raise DimredError("coordinate count must equal training row count")
        if not np.all(np.isfinite(self.coordinates)):
            raise DimredError("coordinates must be finite")


def _component_labels(n: int, heads: np.ndarray, tails: np.ndarray) -> np.ndarray:
    """Connected-component label per vertex, numbered by smallest member."""
    parent = np.arange(n, dtype=np.int64)

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for a, b in zip(heads.tolist(), tails.tolist()):
        ra, rb = find(a), find(b)
        if ra != rb:
            # smaller root wins so labels come out ordered by first member
            if ra < rb:
                parent[rb] = ra
            else:
                parent[ra] = rb
    roots = np.array([find(i) for i in range(n)], dtype=np.int64)
    _, labels = np.unique(roots, return_inverse=True)
    return labels


def _spectral_init(
    n: int, heads: np.ndarray, tails: np.ndarray, w: np.ndarray, dim: int, seed: int
) -> np.ndarray | None:
    """Top non-trivial eigenvectors of the normalized adjacency, or None.

    Expects a connected edge list. Power iteration on the shifted operator
    A_norm + I so the dominant eigenvalue is positive; the analytically
    known trivial eigenvector (sqrt of degrees) is projected out. None
    means no convergence within the iteration budget and the caller should
    fall back to random coordinates.
    """
    deg = np.bincount(heads, weights=w, minlength=n)
    deg += np.bincount(tails, weights=w, minlength=n)
    inv_sqrt = 1.0 / np.sqrt(np.maximum(deg, 1e-12))

    def matvec(v: np.ndarray) -> np.ndarray:
        vv = v * inv_sqrt
        out = np.bincount(heads, weights=w * vv[tails], minlength=n)
        out += np.bincount(tails, weights=w * vv[heads], minlength=n)
        return out * inv_sqrt + v

    trivial = np.sqrt(deg)
    trivial /= np.linalg.norm(trivial)
    basis = [trivial]

    rng = np.random.RandomState(seed & 0x7FFFFFFF)
    vectors = []
    for _ in range(dim):
        v = rng.standard_normal(n)
        for u in basis:
            v -= (u @ v) * u
        norm = np.linalg.norm(v)
        if norm == 0:
            return None
        v /= norm
        converged = False
        for _ in range(_SPECTRAL_MAX_ITER):
            nv = matvec(v)
            for u in basis:
                nv -= (u @ nv) * u
            norm = np.linalg.norm(nv)
            if norm < 1e-300:
                return None
            nv /= norm
            if 1.0 - abs(nv @ v) < _SPECTRAL_TOL:
                v = nv
                converged = True
                break
            v = nv
        if not converged:
            return None
        basis.append(v)
        vectors.append(v)
    coords = np.stack(vectors, axis=1)
    peak = np.abs(coords).max()
    if peak == 0:
        return None
    return coords * (_INIT_SCALE / peak)


def _initial_coordinates(graph: FuzzyGraph, config: EmbeddingConfig) -> np.ndarray:
    n = graph.n_points
    rng = np.random.default_rng(config.seed)
    if config.init != "spectral-like":
        return rng.uniform(-_INIT_SCALE, _INIT_SCALE, size=(n, config.out_dims))

    # each connected component is laid out on its own, then components are
    # strung out along the first axis: clusters that share no edges would
    # otherwise start interleaved at random and the layout can never
    # disentangle them
    comp = _component_labels(n, graph.heads, graph.tails)
    n_comp = int(comp.max()) + 1
    coords = np.empty((n, config.out_dims))
    edge_comp = comp[graph.heads]   # an edge never crosses components
    for c in range(n_comp):
        mask = comp == c
        size = int(mask.sum())
        if size == 1:
            block = np.zeros((1, config.out_dims))
        else:
            remap = np.cumsum(mask) - 1
            keep = edge_comp == c
            block = _spectral_init(
                size, remap[graph.heads[keep]], remap[graph.tails[keep]],
                graph.weights[keep], config.out_dims, config.seed + c,
            )
            if block is None:
                block = rng.uniform(-_INIT_SCALE, _INIT_SCALE,
                                    size=(size, config.out_dims))
        block = block - block.mean(axis=0)
        if n_comp > 1:
            block[:, 0] += c * 3.0 * _INIT_SCALE
        coords[mask] = block
    return coords


def _epoch_schedule(weights: np.ndarray, n_epochs: int) -> np.ndarray:
    """Epochs between samples per edge; inf means the edge is never sampled."""
    eps = np.full(weights.shape[0], np.inf)
    w_max = weights.max()
    # edges too weak to fire even once within the budget are dropped
    active = weights >= w_max / n_epochs
    eps[active] = w_max / weights[active]
    return eps


def _rng_state(seed: int) -> np.uint64:
    mixed = ((seed & 0xFFFFFFFFFFFFFFFF) * 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    return np.uint64((mixed ^ 0x6A09E667F3BCC909) | 1)


def embed(
    graph: FuzzyGraph,
    config: EmbeddingConfig,
    X: np.ndarray | None = None,
    signals: list[str] | None = None,
    timestamps: np.ndarray | None = None,
) -> Embedding:
    """Lay out the graph's points in config.out_dims dimensions.

    X/signals/timestamps are optional attachments retained for placing new
    points and for export; the layout itself is driven by the graph alone.
    """
    if X is not None and X.shape[0] != graph.n_points:
        raise DimredError("X row count does not match graph")
    a, b = fit_curve(config.min_dist)
    coords = np.ascontiguousarray(_initial_coordinates(graph, config))

    if config.n_epochs > 0:
        eps = _epoch_schedule(graph.weights, config.n_epochs)
        active = np.isfinite(eps)
        heads = np.concatenate([graph.heads[active], graph.tails[active]])
        tails = np.concatenate([graph.tails[active], graph.heads[active]])
        eps2 = np.concatenate([eps[active], eps[active]])
        optimize_layout(
            coords,
            heads,
            tails,
            eps2,
            config.n_epochs,
            a,
            b,
            _GAMMA,
            config.negative_sample_rate,
            _rng_state(config.seed),
        )

    return Embedding(
        coordinates=coords,
        a=a,
        b=b,
        graph=graph,
        config=replace(config),
        train_data=None if X is None else np.asarray(X, dtype=np.float64),
        signals=list(signals) if signals is not None else None,
        timestamps=None if timestamps is None else np.asarray(timestamps, dtype=np.int64),
    )


def fit_embedding(X, config: EmbeddingConfig | None = None) -> Embedding:
    """Convenience wrapper: fuzzy graph + layout from a matrix in one call.

    Accepts a FeatureMatrix (signals and timestamps carried through) or a
    plain (n, d) array.
    """
    if config is None:
        config = EmbeddingConfig()
    if isinstance(X, FeatureMatrix):
        data, signals, timestamps = X.data, list(X.signals), X.timestamps
    else:
        data = np.asarray(X, dtype=np.float64)
        signals, timestamps = None, None
    graph = build_fuzzy_graph(data, config.n_neighbors, config.metric)
    return embed(graph, config, X=data, signals=signals, timestamps=timestamps)


def transform_new(e: Embedding, X_new) -> np.ndarray:
    """Coordinates for new rows; training coordinates are never moved."""
    if e.train_data is None:
        raise DimredError("embedding retains no training data; refit with fit_embedding")
    if isinstance(X_new, FeatureMatrix):
        if e.signals is not None and list(X_new.signals) != e.signals:
            raise DimredError("signal mismatch between new data and training data")
        data = X_new.data
    else:
        data = np.asarray(X_new, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != e.train_data.shape[1]:
        raise DimredError(
            f"new data must have {e.train_data.shape[1]} columns, got shape {data.shape}"
        )
    if data.shape[0] == 0:
        return np.zeros((0, e.config.out_dims))

    k = e.config.n_neighbors
    idx, dist = knn_query(e.train_data, data, k, e.config.metric)
    rho, sigma = smooth_knn(dist, k)
    w = membership_weights(dist, rho, sigma)

    anchor = e.coordinates[idx]                      # (m, k, dim)
    coords = (w[:, :, None] * anchor).sum(axis=1) / w.sum(axis=1)[:, None]
    coords = np.ascontiguousarray(coords)
    optimize_new_points(
        coords,
        e.coordinates,
        idx,
        np.ascontiguousarray(w),
        _TRANSFORM_EPOCHS,
        e.a,
        e.b,
    )
    return coords


def embedding_to_doc(e: Embedding) -> dict:
    return {
        "format": _FORMAT,
        "version": _FORMAT_VERSION,
        "config": e.config.to_dict(),
        "curve": {"a": e.a, "b": e.b},
        "coordinates": e.coordinates.tolist(),
        "graph": {
            "knn_indices": e.graph.knn_indices.tolist(),
            "knn_distances": e.graph.knn_distances.tolist(),
            "rho": e.graph.rho.tolist(),
            "sigma": e.graph.sigma.tolist(),
            "heads": e.graph.heads.tolist(),
            "tails": e.graph.tails.tolist(),
            "weights": e.graph.weights.tolist(),
        },
        "train_data": None if e.train_data is None else e.train_data.tolist(),
        "signals": e.signals,
        "timestamps": None if e.timestamps is None else e.timestamps.tolist(),
    }


def save_embedding(e: Embedding, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(embedding_to_doc(e), fh)


def embedding_from_doc(doc: dict) -> Embedding:
    if doc.get("format") != _FORMAT:
        raise DimredError(f"not an embedding document: format {doc.get('format')!r}")
    if doc.get("version") != _FORMAT_VERSION:
        raise DimredError(f"unsupported embedding document version {doc.get('version')}")
    g = doc["graph"]
    graph = FuzzyGraph(
        knn_indices=np.asarray(g["knn_indices"], dtype=np.int64),
        knn_distances=np.asarray(g["knn_distances"], dtype=np.float64),
        rho=np.asarray(g["rho"], dtype=np.float64),
        sigma=np.asarray(g["sigma"], dtype=np.float64),
        heads=np.asarray(g["heads"], dtype=np.int64),
        tails=np.asarray(g["tails"], dtype=np.int64),
        weights=np.asarray(g["weights"], dtype=np.float64),
    )
    return Embedding(
        coordinates=np.asarray(doc["coordinates"], dtype=np.float64),
        a=float(doc["curve"]["a"]),
        b=float(doc["curve"]["b"]),
        graph=graph,
        config=EmbeddingConfig.from_dict(doc["config"]),
        train_data=None
        if doc["train_data"] is None
        else np.asarray(doc["train_data"], dtype=np.float64),
        signals=doc["signals"],
        timestamps=None
        if doc["timestamps"] is None
        else np.asarray(doc["timestamps"], dtype=np.int64),
    )


def load_embedding(path) -> Embedding:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return embedding_from_doc(doc)


def export_embedding_csv(e: Embedding, path) -> None:
    """Map export: one row per training point, `timestamp,x,y[,z],row_id`."""
    if e.timestamps is None:
        raise DimredError("embedding has no timestamps; fit from a FeatureMatrix to export")
    dim = e.coordinates.shape[1]
    axes = ["x", "y", "z"][:dim]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("timestamp," + ",".join(axes) + ",row_id\n")
        for i in range(e.coordinates.shape[0]):
            ts = format_timestamp(int(e.timestamps[i]))
            vals = ",".join(repr(float(v)) for v in e.coordinates[i])
            fh.write(f"{ts},{vals},{i}\n")
