"""Embedding quality measurement."""

from __future__ import annotations

import numpy as np

from hydromon.dimred.neighbors import _pairwise_block
from hydromon.dimred.pca import DimredError


def trustworthiness(X: np.ndarray, coordinates: np.ndarray, k: int) -> float:
    """How much the projection invents neighborhoods, 1 = none invented.

    Points that appear in a projected k-neighborhood but were distant in
    input space are penalized by their input-space rank excess. Normalized
    so a perfect neighborhood-preserving map scores 1 and the worst
    possible map scores 0 (valid for k < n/2).
    """
    X = np.asarray(X, dtype=np.float64)
    coordinates = np.asarray(coordinates, dtype=np.float64)
    n = X.shape[0]
    if coordinates.shape[0] != n:
        raise DimredError("X and coordinates must have the same row count")
    if not 1 <= k < n / 2:
        raise DimredError(f"k must satisfy 1 <= k < n/2, got k={k}, n={n}")

    D_in = _pairwise_block(X, X, "euclidean")
    D_out = _pairwise_block(coordinates, coordinates, "euclidean")
    np.fill_diagonal(D_in, np.inf)
    np.fill_diagonal(D_out, np.inf)

    order_in = np.argsort(D_in, axis=1, kind="stable")
    rank_in = np.empty_like(order_in)
    np.put_along_axis(rank_in, order_in, np.arange(1, n + 1)[None, :].repeat(n, axis=0), axis=1)

    emb_nn = np.argsort(D_out, axis=1, kind="stable")[:, :k]
    ranks = np.take_along_axis(rank_in, emb_nn, axis=1)
    penalty = np.maximum(ranks - k, 0).sum()

    return float(1.0 - (2.0 / (n * k * (2 * n - 3 * k - 1))) * penalty)
