"""Partitioning of operating datapoints and agreement scoring.

Four clustering algorithms over the normalized feature rows: k-means,
agglomerative (Lance-Williams recurrences), density-based scanning, and a
self-organizing map. All of them run on the full-dimensional normalized
matrix, not on the 2D projection; the projection is only where results get
displayed. Precision against reference labels is mapping-maximized, since
cluster ids carry no inherent meaning.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from hydromon.ingest import format_timestamp

_BLOCK = 512


class ClusterError(ValueError):
    pass


def _as_data(X) -> np.ndarray:
    data = np.asarray(getattr(X, "data", X), dtype=np.float64)
    if data.ndim != 2:
        raise ClusterError(f"expected a 2D matrix, got shape {data.shape}")
    return data


@dataclass
class ClusterAssignment:
    labels: np.ndarray        # int per row, -1 = noise
    algorithm: str
    params: dict = field(default_factory=dict)
    n_clusters: int = 0

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        k = self.n_clusters
        if self.labels.size:
            lo, hi = self.labels.min(), self.labels.max()
            if lo < -1 or hi >= k:
                raise ClusterError(f"labels must lie in {{-1, 0..{k - 1}}}")
        present = np.unique(self.labels[self.labels >= 0])
        if len(present) != k:
            raise ClusterError(f"expected every label 0..{k - 1} to occur, found {present}")


@dataclass
class KMeansModel:
    centroids: np.ndarray     # (k, d)
    inertia: float
    n_iter: int
    seed: int

    def __post_init__(self):
        if self.centroids.shape[0] < 1:
            raise ClusterError("k must be >= 1")
        if self.inertia < 0:
            raise ClusterError("inertia must be >= 0")

    def predict(self, X) -> np.ndarray:
        data = _as_data(X)
        d2 = ((data[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        return np.argmin(d2, axis=1).astype(np.int64)


@dataclass
class SomGrid:
    width: int
    height: int
    codebook: np.ndarray      # (width*height, d)
    epochs: int
    seed: int

    def __post_init__(self):
        if self.width * self.height < 1:
            raise ClusterError("grid must have at least one unit")
        if not np.all(np.isfinite(self.codebook)):
            raise ClusterError("codebook must be finite")

    def best_matching_units(self, X) -> np.ndarray:
        data = _as_data(X)
        d2 = ((data[:, None, :] - self.codebook[None, :, :]) ** 2).sum(axis=2)
        return np.argmin(d2, axis=1).astype(np.int64)


# ---------------------------------------------------------------- k-means


def _kmeanspp_seed(data: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    # greedy variant: several D2-sampled candidates per step, keep the one
    # that lowers the potential most
    n = data.shape[0]
    centroids = np.empty((k, data.shape[1]))
    centroids[0] = data[rng.integers(n)]
    d2 = ((data - centroids[0]) ** 2).sum(axis=1)
    n_candidates = 2 + int(np.log(k)) if k > 1 else 1
    for c in range(1, k):
        total = d2.sum()
        if total > 0:
            picks = rng.choice(n, size=n_candidates, p=d2 / total)
        else:
            picks = rng.integers(n, size=n_candidates)
        cand_d2 = ((data[None, :, :] - data[picks][:, None, :]) ** 2).sum(axis=2)
        potentials = np.minimum(cand_d2, d2[None, :]).sum(axis=1)
        winner = int(np.argmin(potentials))
        centroids[c] = data[picks[winner]]
        d2 = np.minimum(d2, cand_d2[winner])
    return centroids


def _assign(data: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = ((data[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)  # ties go to the lower centroid index
    return labels, d2[np.arange(len(data)), labels]


def _kmeans_single(data: np.ndarray, k: int, seed: int, max_iter: int) -> KMeansModel:
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_seed(data, k, rng)
    prev_labels = None
    prev_inertia = np.inf
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        labels, dist2 = _assign(data, centroids)
        repaired: set[int] = set()
        for c in range(k):
            if np.any(labels == c):
                continue
            # an empty cluster takes over the point farthest from its centroid
            order = np.argsort(-dist2, kind="stable")
            pick = next(int(p) for p in order if int(p) not in repaired)
            repaired.add(pick)
            labels[pick] = c
            dist2[pick] = 0.0
        for c in range(k):
            centroids[c] = data[labels == c].mean(axis=0)
        inertia = float(((data - centroids[labels]) ** 2).sum())
        assert inertia <= prev_inertia * (1 + 1e-12) + 1e-9, (
            f"inertia increased: {prev_inertia} -> {inertia}"
        )
        prev_inertia = inertia
        if prev_labels is not None and np.array_equal(labels, prev_labels):
            break
        prev_labels = labels
    return KMeansModel(centroids=centroids, inertia=prev_inertia, n_iter=n_iter, seed=seed), labels


def kmeans(
    X, k: int, seed: int = 0, max_iter: int = 300, restarts: int = 1
) -> tuple[KMeansModel, ClusterAssignment]:
    """k-means++ seeding plus Lloyd refinement, best of `restarts` runs."""
    data = _as_data(X)
    n = data.shape[0]
    if not 1 <= k <= n:
        raise ClusterError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    run_seeds = rng.integers(0, 2**63 - 1, size=restarts)
    best: KMeansModel | None = None
    best_labels = None
    for s in run_seeds:
        model, labels = _kmeans_single(data, k, int(s), max_iter)
        if best is None or model.inertia < best.inertia:
            best, best_labels = model, labels
    assignment = ClusterAssignment(
        labels=best_labels,
        algorithm="kmeans",
        params={"k": k, "seed": seed, "max_iter": max_iter, "restarts": restarts},
        n_clusters=k,
    )
    return best, assignment


# ----------------------------------------------------------- agglomerative

_LINKAGES = ("ward", "single", "complete", "average")


def _pairwise_sq(data: np.ndarray) -> np.ndarray:
    n = data.shape[0]
    D = np.zeros((n, n))
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        block = np.zeros((stop - start, n))
        for j in range(data.shape[1]):
            diff = data[start:stop, j, None] - data[None, :, j]
            block += diff * diff
        D[start:stop] = block
    return D


def _lance_williams(
    linkage: str, d_ac: np.ndarray, d_bc: np.ndarray, d_ab: float,
    n_a: int, n_b: int, n_c: np.ndarray,
) -> np.ndarray:
    if linkage == "ward":
        tot = n_a + n_b + n_c
        return ((n_a + n_c) * d_ac + (n_b + n_c) * d_bc - n_c * d_ab) / tot
    if linkage == "single":
        return np.minimum(d_ac, d_bc)
    if linkage == "complete":
        return np.maximum(d_ac, d_bc)
    if linkage == "average":
        return (n_a * d_ac + n_b * d_bc) / (n_a + n_b)
    raise ClusterError(f"linkage must be one of {_LINKAGES}, got {linkage!r}")


def agglomerative(
    X, k: int, linkage: str = "ward", record_merges: bool = False
) -> ClusterAssignment:
    """Greedy pairwise merging from singletons until k clusters remain.

    Merge ties break toward the smallest (i, j) pair of cluster ids; the
    merged cluster keeps the smaller id. Ward tracks the variance-increase
    cost directly (initialized to squared distance / 2), the other linkages
    track plain distances. With record_merges the full (i, j, cost) merge
    sequence lands in params["merges"].
    """
    data = _as_data(X)
    n = data.shape[0]
    if not 1 <= k <= n:
        raise ClusterError(f"k must be in [1, {n}], got {k}")
    if linkage not in _LINKAGES:
        raise ClusterError(f"linkage must be one of {_LINKAGES}, got {linkage!r}")

    D = _pairwise_sq(data)
    if linkage == "ward":
        D /= 2.0
    else:
        np.sqrt(D, out=D)
    np.fill_diagonal(D, np.inf)

    active = np.ones(n, dtype=bool)
    size = np.ones(n, dtype=np.int64)
    parent = np.arange(n)
    nn_idx = np.argmin(D, axis=1)
    nn_dist = D[np.arange(n), nn_idx]
    merges: list[tuple[int, int, float]] = []

    for _ in range(n - k):
        rows = np.flatnonzero(active)
        a = rows[np.argmin(nn_dist[rows])]
        b = nn_idx[a]
        if b < a:
            a, b = b, a
        d_ab = D[a, b]
        if record_merges:
            merges.append((int(a), int(b), float(d_ab)))

        others = active.copy()
        others[a] = others[b] = False
        oc = np.flatnonzero(others)
        merged = _lance_williams(linkage, D[a, oc], D[b, oc], d_ab, size[a], size[b], size[oc])
        D[a, oc] = merged
        D[oc, a] = merged
        D[a, b] = D[b, a] = np.inf
        D[b, oc] = np.inf
        D[oc, b] = np.inf

        size[a] += size[b]
        active[b] = False
        parent[b] = a

        nn_idx[a] = np.argmin(D[a])
        nn_dist[a] = D[a, nn_idx[a]]
        stale = others & ((nn_idx == a) | (nn_idx == b))
        for c in np.flatnonzero(stale):
            nn_idx[c] = np.argmin(D[c])
            nn_dist[c] = D[c, nn_idx[c]]
        fresh = oc[~stale[oc]]
        closer = D[fresh, a] < nn_dist[fresh]
        tied_lower = (D[fresh, a] == nn_dist[fresh]) & (a < nn_idx[fresh])
        upd = fresh[closer | tied_lower]
        nn_idx[upd] = a
        nn_dist[upd] = D[upd, a]

    # resolve each point to its surviving root id
    root = np.arange(n)
    for i in range(n):
        r = i
        while parent[r] != r:
            r = parent[r]
        root[i] = r
    labels = np.empty(n, dtype=np.int64)
    mapping: dict[int, int] = {}
    for i in range(n):
        r = int(root[i])
        if r not in mapping:
            mapping[r] = len(mapping)
        labels[i] = mapping[r]

    params: dict = {"k": k, "linkage": linkage}
    if record_merges:
        params["merges"] = merges
    return ClusterAssignment(
        labels=labels,
        algorithm="agglomerative",
        params=params,
        n_clusters=k,
    )


# ----------------------------------------------------------------- dbscan


def dbscan(X, eps: float, min_pts: int) -> ClusterAssignment:
    """Core/border/noise partitioning over closed eps-balls.

    Clusters are connected components of the core-point graph, numbered in
    order of their first core row. Border points join the cluster of their
    nearest core point, which keeps the partition independent of row order.
    """
    data = _as_data(X)
    if eps <= 0:
        raise ClusterError(f"eps must be positive, got {eps}")
    if min_pts < 1:
        raise ClusterError(f"min_pts must be >= 1, got {min_pts}")
    n = data.shape[0]

    counts = np.zeros(n, dtype=np.int64)
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        block = np.zeros((stop - start, n))
        for j in range(data.shape[1]):
            diff = data[start:stop, j, None] - data[None, :, j]
            block += diff * diff
        counts[start:stop] = (block <= eps * eps).sum(axis=1)  # self included
    core = counts >= min_pts

    labels = np.full(n, -1, dtype=np.int64)
    eps2 = eps * eps
    cid = 0
    for i in range(n):
        if not core[i] or labels[i] != -1:
            continue
        labels[i] = cid
        queue = [i]
        while queue:
            p = queue.pop()
            d2 = ((data - data[p]) ** 2).sum(axis=1)
            reach = np.flatnonzero((d2 <= eps2) & core & (labels == -1))
            labels[reach] = cid
            queue.extend(reach.tolist())
        cid += 1

    border = np.flatnonzero(~core)
    core_rows = np.flatnonzero(core)
    if len(core_rows):
        for i in border:
            d2 = ((data[core_rows] - data[i]) ** 2).sum(axis=1)
            j = int(np.argmin(d2))
            if d2[j] <= eps2:
                labels[i] = labels[core_rows[j]]

    return ClusterAssignment(
        labels=labels,
        algorithm="dbscan",
        params={"eps": eps, "min_pts": min_pts},
        n_clusters=cid,
    )


# -------------------------------------------------------------------- som


def som_fit(
    X, grid_w: int, grid_h: int, epochs: int, seed: int = 0
) -> tuple[SomGrid, ClusterAssignment]:
    """Online self-organizing map on a grid_w x grid_h unit lattice.

    Neighborhood radius decays linearly from max(grid_w, grid_h)/2 to 0.5
    and learning rate from 0.5 to 0.01 across epochs. Assignment labels are
    best-matching units, densely renumbered over the occupied units.
    """
    data = _as_data(X)
    if grid_w * grid_h < 1:
        raise ClusterError("grid must have at least one unit")
    if epochs < 1:
        raise ClusterError(f"epochs must be >= 1, got {epochs}")
    n = data.shape[0]
    units = grid_w * grid_h
    rng = np.random.default_rng(seed)

    codebook = data[rng.integers(0, n, size=units)].copy()
    ux, uy = np.meshgrid(np.arange(grid_w), np.arange(grid_h), indexing="ij")
    grid_pos = np.column_stack([ux.ravel(), uy.ravel()]).astype(np.float64)

    r0, r1 = max(grid_w, grid_h) / 2.0, 0.5
    lr0, lr1 = 0.5, 0.01
    for epoch in range(epochs):
        frac = epoch / (epochs - 1) if epochs > 1 else 1.0
        radius = r0 + (r1 - r0) * frac
        lr = lr0 + (lr1 - lr0) * frac
        order = rng.permutation(n)
        for i in order:
            x = data[i]
            d2 = ((codebook - x) ** 2).sum(axis=1)
            bmu = int(np.argmin(d2))
            g2 = ((grid_pos - grid_pos[bmu]) ** 2).sum(axis=1)
            h = lr * np.exp(-g2 / (2.0 * radius * radius))
            codebook += h[:, None] * (x - codebook)

    grid = SomGrid(width=grid_w, height=grid_h, codebook=codebook, epochs=epochs, seed=seed)
    bmus = grid.best_matching_units(data)
    occupied = np.unique(bmus)  # ascending unit ids
    remap = {int(u): i for i, u in enumerate(occupied)}
    labels = np.array([remap[int(u)] for u in bmus], dtype=np.int64)
    assignment = ClusterAssignment(
        labels=labels,
        algorithm="som",
        params={"grid_w": grid_w, "grid_h": grid_h, "epochs": epochs, "seed": seed,
                "unit_of_label": [int(u) for u in occupied]},
        n_clusters=len(occupied),
    )
    return grid, assignment


# -------------------------------------------------------------- precision


def precision(a: ClusterAssignment, reference: np.ndarray) -> float:
    """Best-mapping agreement between cluster ids and reference labels.

    The mapping from clusters to reference labels is injective; exhaustive
    over all mappings up to 8 clusters, greedy max-overlap beyond. Noise
    rows can never match.
    """
    reference = np.asarray(reference)
    if len(reference) != len(a.labels):
        raise ClusterError(
            f"length mismatch: {len(a.labels)} labels vs {len(reference)} reference"
        )
    n = len(reference)
    if n == 0:
        raise ClusterError("empty assignment")

    ref_ids, ref_inv = np.unique(reference, return_inverse=True)
    mask = a.labels >= 0
    k, L = a.n_clusters, len(ref_ids)
    overlap = np.zeros((k, L), dtype=np.int64)
    np.add.at(overlap, (a.labels[mask], ref_inv[mask]), 1)

    if k <= 8:
        best = 0
        if k <= L:
            for perm in itertools.permutations(range(L), k):
                best = max(best, sum(overlap[c, perm[c]] for c in range(k)))
        else:
            for perm in itertools.permutations(range(k), L):
                best = max(best, sum(overlap[perm[r], r] for r in range(L)))
        return best / n

    total = 0
    used_c: set[int] = set()
    used_r: set[int] = set()
    flat = [(-overlap[c, r], c, r) for c in range(k) for r in range(L)]
    for neg, c, r in sorted(flat):
        if c in used_c or r in used_r:
            continue
        used_c.add(c)
        used_r.add(r)
        total += -neg
    return total / n


# ---------------------------------------------------------------- exports


def export_assignment_csv(a: ClusterAssignment, timestamps: np.ndarray, path) -> None:
    """CSV `row_id,timestamp,label` plus a JSON sidecar of parameters."""
    timestamps = np.asarray(timestamps, dtype=np.int64)
    if len(timestamps) != len(a.labels):
        raise ClusterError("timestamps length does not match labels")
    path = str(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("row_id,timestamp,label\n")
        for i, (ts, lab) in enumerate(zip(timestamps, a.labels)):
            fh.write(f"{i},{format_timestamp(int(ts))},{int(lab)}\n")
    sidecar = {
        "algorithm": a.algorithm,
        "params": a.params,
        "n_clusters": a.n_clusters,
    }
    with open(path + ".params.json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")


def load_reference_labels(path) -> np.ndarray:
    """Reads `row_id,label` CSV into a dense label array ordered by row id."""
    rows: dict[int, int] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "row_id,label":
            raise ClusterError(f"expected header 'row_id,label', got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                rid_s, lab_s = line.split(",")
                rid, lab = int(rid_s), int(lab_s)
            except ValueError as exc:
                raise ClusterError(f"{path}:{lineno}: malformed row {line!r}") from exc
            if rid in rows:
                raise ClusterError(f"{path}:{lineno}: duplicate row id {rid}")
            rows[rid] = lab
    if not rows:
        raise ClusterError(f"{path}: no rows")
    n = max(rows) + 1
    if sorted(rows) != list(range(n)):
        raise ClusterError(f"{path}: row ids must cover 0..{n - 1}")
    return np.array([rows[i] for i in range(n)], dtype=np.int64)
