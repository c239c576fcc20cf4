"""Soft-voting extension of clusterings to unseen datapoints.

Density-based and hierarchical clusterings have no native way to label a
new row, so a three-model ensemble (nearest neighbors, axis-aligned
decision tree, per-class linear SVM) is trained on the clustering output
and averaged. All three bases see identical training data; the vote is the
arithmetic mean of their class distributions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hydromon.dimred.neighbors import knn_query


class ClassifyError(ValueError):
    pass


@dataclass
class VotingConfig:
    knn_k: int = 5
    tree_max_depth: int = 8
    tree_min_leaf: int = 2
    svm_epochs: int = 200
    svm_lr: float = 0.05
    svm_reg: float = 1e-4
    seed: int = 0


# ------------------------------------------------------------------- tree


@dataclass
class TreeNode:
    # leaf: proba set; internal: feature/threshold/left/right set
    proba: np.ndarray | None = None
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    def to_dict(self) -> dict:
        if self.proba is not None:
            return {"proba": self.proba.tolist()}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeNode":
        if "proba" in d:
            return cls(proba=np.asarray(d["proba"], dtype=np.float64))
        return cls(
            feature=d["feature"],
            threshold=d["threshold"],
            left=cls.from_dict(d["left"]),
            right=cls.from_dict(d["right"]),
        )


def _gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - (p * p).sum())


def _class_proba(y: np.ndarray, n_classes: int) -> np.ndarray:
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    return counts / counts.sum()


def _best_split(X: np.ndarray, y: np.ndarray, n_classes: int, min_leaf: int):
    """(feature, threshold) minimizing weighted child Gini, or None.

    Ties resolve to the lower feature index, then the lower threshold:
    a candidate replaces the incumbent only on strict improvement, and
    features/thresholds are scanned in ascending order.
    """
    n = len(y)
    parent = _gini(np.bincount(y, minlength=n_classes))
    best = None
    best_score = np.inf
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs, ys = X[order, f], y[order]
        left_counts = np.zeros(n_classes)
        right_counts = np.bincount(ys, minlength=n_classes).astype(np.float64)
        for i in range(n - 1):
            left_counts[ys[i]] += 1
            right_counts[ys[i]] -= 1
            if xs[i] == xs[i + 1]:
                continue
            n_left = i + 1
            n_right = n - n_left
            if n_left < min_leaf or n_right < min_leaf:
                continue
            score = (n_left * _gini(left_counts) + n_right * _gini(right_counts)) / n
            if score < best_score:
                best_score = score
                best = (f, (xs[i] + xs[i + 1]) / 2.0)
    if best is None or best_score >= parent:
        return None
    return best


def _grow_tree(X, y, n_classes, depth, max_depth, min_leaf) -> TreeNode:
    if depth >= max_depth or len(y) < 2 * min_leaf or len(np.unique(y)) == 1:
        return TreeNode(proba=_class_proba(y, n_classes))
    split = _best_split(X, y, n_classes, min_leaf)
    if split is None:
        return TreeNode(proba=_class_proba(y, n_classes))
    f, thr = split
    mask = X[:, f] <= thr
    return TreeNode(
        feature=f,
        threshold=thr,
        left=_grow_tree(X[mask], y[mask], n_classes, depth + 1, max_depth, min_leaf),
        right=_grow_tree(X[~mask], y[~mask], n_classes, depth + 1, max_depth, min_leaf),
    )


def _tree_proba(node: TreeNode, x: np.ndarray) -> np.ndarray:
    while node.proba is None:
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.proba


def _tree_depth(node: TreeNode) -> int:
    if node.proba is not None:
        return 0
    return 1 + max(_tree_depth(node.left), _tree_depth(node.right))


def _tree_min_leaf_size(node: TreeNode, X, y) -> int:
    if node.proba is not None:
        return len(y)
    mask = X[:, node.feature] <= node.threshold
    return min(
        _tree_min_leaf_size(node.left, X[mask], y[mask]),
        _tree_min_leaf_size(node.right, X[~mask], y[~mask]),
    )


# -------------------------------------------------------------------- svm


def _fit_svm(X, y01, epochs, lr, reg, rng) -> tuple[np.ndarray, float]:
    """One-vs-rest hinge-loss subgradient descent for a single class."""
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    sign = np.where(y01, 1.0, -1.0)
    for _ in range(epochs):
        for i in rng.permutation(n):
            margin = sign[i] * (X[i] @ w + b)
            if margin < 1.0:
                w -= lr * (reg * w - sign[i] * X[i])
                b += lr * sign[i]
            else:
                w -= lr * reg * w
    return w, b


def svm_margins(W: np.ndarray, b: np.ndarray, X: np.ndarray) -> np.ndarray:
    return X @ W.T + b


# --------------------------------------------------------------- ensemble


@dataclass
class VotingClassifier:
    classes: np.ndarray             # sorted original cluster ids
    train_X: np.ndarray             # (n, d) shared by all three bases
    train_y: np.ndarray             # class indices into `classes`
    knn_k: int
    tree: TreeNode
    svm_W: np.ndarray               # (n_classes, d)
    svm_b: np.ndarray               # (n_classes,)
    config: VotingConfig
    base_weights: np.ndarray = field(default_factory=lambda: np.full(3, 1 / 3))

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def to_dict(self, row_ids: np.ndarray | None = None) -> dict:
        """Serializable form; training points stored as row-id references."""
        if row_ids is None:
            row_ids = np.arange(len(self.train_y))
        return {
            "classes": self.classes.tolist(),
            "row_ids": np.asarray(row_ids).tolist(),
            "train_y": self.train_y.tolist(),
            "knn_k": self.knn_k,
            "tree": self.tree.to_dict(),
            "svm_W": self.svm_W.tolist(),
            "svm_b": self.svm_b.tolist(),
            "config": self.config.__dict__.copy(),
            "base_weights": self.base_weights.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict, train_matrix: np.ndarray) -> "VotingClassifier":
        row_ids = np.asarray(d["row_ids"], dtype=np.int64)
        return cls(
            classes=np.asarray(d["classes"], dtype=np.int64),
            train_X=np.asarray(train_matrix, dtype=np.float64)[row_ids],
            train_y=np.asarray(d["train_y"], dtype=np.int64),
            knn_k=d["knn_k"],
            tree=TreeNode.from_dict(d["tree"]),
            svm_W=np.asarray(d["svm_W"], dtype=np.float64),
            svm_b=np.asarray(d["svm_b"], dtype=np.float64),
            config=VotingConfig(**d["config"]),
            base_weights=np.asarray(d["base_weights"], dtype=np.float64),
        )


def fit_voting(X, labels: np.ndarray, config: VotingConfig | None = None) -> VotingClassifier:
    """Train all three bases on the non-noise rows of a clustering result."""
    if config is None:
        config = VotingConfig()
    data = np.asarray(getattr(X, "data", X), dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != data.shape[0]:
        raise ClassifyError("labels length does not match row count")
    keep = labels >= 0
    data, labels = data[keep], labels[keep]
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ClassifyError("voting requires >= 2 classes")
    y = np.searchsorted(classes, labels)

    tree = _grow_tree(data, y, len(classes), 0, config.tree_max_depth, config.tree_min_leaf)

    rng = np.random.default_rng(config.seed)
    W = np.empty((len(classes), data.shape[1]))
    b = np.empty(len(classes))
    for c in range(len(classes)):
        W[c], b[c] = _fit_svm(
            data, y == c, config.svm_epochs, config.svm_lr, config.svm_reg, rng
        )

    return VotingClassifier(
        classes=classes,
        train_X=data,
        train_y=y,
        knn_k=min(config.knn_k, len(y)),
        tree=tree,
        svm_W=W,
        svm_b=b,
        config=config,
    )


def _knn_proba(c: VotingClassifier, rows: np.ndarray) -> np.ndarray:
    idx, _ = knn_query(c.train_X, rows, c.knn_k)
    neigh = c.train_y[idx]
    out = np.zeros((len(rows), c.n_classes))
    for j in range(c.knn_k):
        np.add.at(out, (np.arange(len(rows)), neigh[:, j]), 1.0)
    return out / c.knn_k


def _svm_proba(c: VotingClassifier, rows: np.ndarray) -> np.ndarray:
    margins = svm_margins(c.svm_W, c.svm_b, rows)
    sq = 1.0 / (1.0 + np.exp(-margins))
    return sq / sq.sum(axis=1, keepdims=True)


def predict_proba(c: VotingClassifier, x) -> np.ndarray:
    """Mean of the three base distributions; rows sum to 1."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    rows = x[None, :] if single else x
    if rows.shape[1] != c.train_X.shape[1]:
        raise ClassifyError(
            f"expected {c.train_X.shape[1]} features, got {rows.shape[1]}"
        )
    tree_p = np.stack([_tree_proba(c.tree, r) for r in rows])
    stacked = np.stack([_knn_proba(c, rows), tree_p, _svm_proba(c, rows)])
    proba = np.tensordot(c.base_weights, stacked, axes=1)
    proba /= proba.sum(axis=1, keepdims=True)
    return proba[0] if single else proba


def predict(c: VotingClassifier, x) -> np.ndarray | int:
    """Most probable class id; exact ties go to the lowest class id."""
    proba = predict_proba(c, x)
    if proba.ndim == 1:
        return int(c.classes[int(np.argmax(proba))])
    return c.classes[np.argmax(proba, axis=1)]
