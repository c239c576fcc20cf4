"""Exact brute-force nearest neighbors and the fuzzy neighborhood graph.

Distances are computed in row blocks so memory stays bounded at desk scale;
no approximate index is used. Ties are broken by lower row index via stable
sorting, which keeps every downstream stage deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hydromon.dimred.pca import DimredError

_BLOCK_ROWS = 256
_SIGMA_ITER = 64
_SIGMA_TOL = 1e-3


def _pairwise_block(Q: np.ndarray, X: np.ndarray, metric: str) -> np.ndarray:
    """Dense distance block between query rows Q and all rows of X.

    Accumulated feature by feature rather than via the Gram identity: the
    result is then bit-identical to a direct per-pair scan, so distance
    ties break the same way everywhere.
    """
    D = np.zeros((Q.shape[0], X.shape[0]))
    if metric == "euclidean":
        for j in range(Q.shape[1]):
            diff = Q[:, j, None] - X[None, :, j]
            D += diff * diff
        return np.sqrt(D)
    if metric == "manhattan":
        for j in range(Q.shape[1]):
            D += np.abs(Q[:, j, None] - X[None, :, j])
        return D
    raise DimredError(f"unsupported metric {metric!r}")


def knn_graph(X: np.ndarray, k: int, metric: str = "euclidean") -> tuple[np.ndarray, np.ndarray]:
    """k nearest other rows for every row of X.

    Returns (indices, distances), both (n, k), each row sorted by distance
    with ties resolved toward the lower row index. Self is excluded.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if k >= n:
        raise DimredError(f"k must be below n={n}, got {k}")
    indices = np.empty((n, k), dtype=np.int64)
    distances = np.empty((n, k))
    for start in range(0, n, _BLOCK_ROWS):
        stop = min(start + _BLOCK_ROWS, n)
        D = _pairwise_block(X[start:stop], X, metric)
        D[np.arange(stop - start), np.arange(start, stop)] = np.inf
        # stable sort: equal distances keep column (= row index) order
        order = np.argsort(D, axis=1, kind="stable")[:, :k]
        indices[start:stop] = order
        distances[start:stop] = np.take_along_axis(D, order, axis=1)
    return indices, distances


def knn_query(X: np.ndarray, Q: np.ndarray, k: int, metric: str = "euclidean") -> tuple[np.ndarray, np.ndarray]:
    """k nearest rows of X for each query row; queries are not in X."""
    X = np.asarray(X, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    if k > X.shape[0]:
        raise DimredError(f"k must be at most n={X.shape[0]}, got {k}")
    nq = Q.shape[0]
    indices = np.empty((nq, k), dtype=np.int64)
    distances = np.empty((nq, k))
    for start in range(0, nq, _BLOCK_ROWS):
        stop = min(start + _BLOCK_ROWS, nq)
        D = _pairwise_block(Q[start:stop], X, metric)
        order = np.argsort(D, axis=1, kind="stable")[:, :k]
        indices[start:stop] = order
        distances[start:stop] = np.take_along_axis(D, order, axis=1)
    return indices, distances


def smooth_knn(distances: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-point (rho, sigma) calibration of the neighborhood kernel.

    rho is the smallest positive neighbor distance; sigma is found by binary
    search so that sum_j exp(-max(0, d_j - rho) / sigma) hits log2(k).
    Points whose neighbors all sit at distance zero get sigma = 1.
    """
    distances = np.asarray(distances, dtype=np.float64)
    if k < 2:
        raise DimredError(f"smooth_knn needs k >= 2, got {k}")
    n = distances.shape[0]
    target = np.log2(k)

    positive = np.where(distances > 0, distances, np.inf)
    rho = positive.min(axis=1)
    all_zero = ~np.isfinite(rho)
    rho[all_zero] = 0.0

    gaps = np.maximum(distances - rho[:, None], 0.0)

    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    mid = np.ones(n)
    for _ in range(_SIGMA_ITER):
        psum = np.exp(-gaps / mid[:, None]).sum(axis=1)
        done = np.abs(psum - target) < _SIGMA_TOL
        if done.all():
            break
        too_high = (psum > target) & ~done
        too_low = (psum < target) & ~done
        hi[too_high] = mid[too_high]
        lo[too_low] = mid[too_low]
        unbounded = too_low & np.isinf(hi)
        mid = np.where(np.isinf(hi), mid, (lo + hi) / 2.0)
        mid[unbounded] = mid[unbounded] * 2.0
    sigma = mid
    sigma[all_zero] = 1.0
    return rho, sigma


def fuzzy_union(w_ij: float, w_ji: float) -> float:
    """Probabilistic OR of two directed membership weights."""
    if not (0.0 <= w_ij <= 1.0 and 0.0 <= w_ji <= 1.0):
        raise DimredError(f"weights must lie in [0, 1], got ({w_ij}, {w_ji})")
    return w_ij + w_ji - w_ij * w_ji


@dataclass
class FuzzyGraph:
    """Directed kNN memberships plus the symmetrized undirected edge list."""

    knn_indices: np.ndarray    # (n, k) int64
    knn_distances: np.ndarray  # (n, k)
    rho: np.ndarray            # (n,)
    sigma: np.ndarray          # (n,)
    heads: np.ndarray          # (m,) int64, heads < tails
    tails: np.ndarray          # (m,) int64
    weights: np.ndarray        # (m,) in [0, 1]

    @property
    def n_points(self) -> int:
        return self.knn_indices.shape[0]


def membership_weights(distances: np.ndarray, rho: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Directed membership strength of each neighbor edge, in [0, 1]."""
    gaps = np.maximum(np.asarray(distances) - rho[:, None], 0.0)
    return np.exp(-gaps / sigma[:, None])


def build_fuzzy_graph(X: np.ndarray, k: int, metric: str = "euclidean") -> FuzzyGraph:
    """kNN graph -> per-point kernel calibration -> fuzzy-union symmetrization."""
    idx, dist = knn_graph(X, k, metric)
    rho, sigma = smooth_knn(dist, k)
    w = membership_weights(dist, rho, sigma)

    n = X.shape[0]
    src = np.repeat(np.arange(n, dtype=np.int64), k)
    dst = idx.ravel()
    wdir = w.ravel()

    lo_node = np.minimum(src, dst)
    hi_node = np.maximum(src, dst)
    key = lo_node * n + hi_node
    uniq, inverse = np.unique(key, return_inverse=True)
    forward = np.zeros(len(uniq))
    backward = np.zeros(len(uniq))
    is_forward = src < dst
    # each directed edge occurs at most once, so "max" is plain placement
    np.maximum.at(forward, inverse[is_forward], wdir[is_forward])
    np.maximum.at(backward, inverse[~is_forward], wdir[~is_forward])
    weights = forward + backward - forward * backward

    return FuzzyGraph(
        knn_indices=idx,
        knn_distances=dist,
        rho=rho,
        sigma=sigma,
        heads=(uniq // n).astype(np.int64),
        tails=(uniq % n).astype(np.int64),
        weights=weights,
    )
