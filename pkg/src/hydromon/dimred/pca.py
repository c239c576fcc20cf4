"""Principal component baseline, fitted by iterative eigen-decomposition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_POWER_MAX_ITER = 1000
_POWER_TOL = 1e-13


class DimredError(ValueError):
    pass


@dataclass
class PcaModel:
    """Mean vector, orthonormal components (rows) and variance fractions."""

    mean: np.ndarray
    components: np.ndarray            # (k, d), rows orthonormal
    variance_fractions: np.ndarray    # (k,), non-increasing

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) @ self.components.T

    def inverse_transform(self, Y: np.ndarray) -> np.ndarray:
        return np.asarray(Y, dtype=np.float64) @ self.components + self.mean


def _leading_eigenvector(C: np.ndarray, previous: list[np.ndarray], rng) -> tuple[np.ndarray, float]:
    """Power iteration for the next eigenvector, kept orthogonal to `previous`."""
    d = C.shape[0]
    v = rng.standard_normal(d)
    for prev in previous:
        v -= (v @ prev) * prev
    norm = np.linalg.norm(v)
    if norm == 0.0:
        v = np.zeros(d)
        v[len(previous) % d] = 1.0
    else:
        v /= norm

    eigval = 0.0
    for _ in range(_POWER_MAX_ITER):
        w = C @ v
        for prev in previous:
            w -= (w @ prev) * prev
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            # null direction: eigenvalue 0, keep the current orthonormal v
            return v, 0.0
        w /= norm
        new_eigval = float(w @ C @ w)
        # sign-insensitive convergence check
        if min(np.linalg.norm(w - v), np.linalg.norm(w + v)) < _POWER_TOL or abs(
            new_eigval - eigval
        ) <= _POWER_TOL * max(abs(new_eigval), 1e-30):
            v, eigval = w, new_eigval
            break
        v, eigval = w, new_eigval
    return v, max(eigval, 0.0)


def _fix_sign(v: np.ndarray) -> np.ndarray:
    # deterministic orientation: largest-magnitude entry made positive
    pivot = np.argmax(np.abs(v))
    return -v if v[pivot] < 0 else v


def pca_fit(X, k: int) -> PcaModel:
    """Top-k principal components of the covariance of mean-centered X.

    X may be a FeatureMatrix or a plain (n, d) array.
    """
    X = np.asarray(getattr(X, "data", X), dtype=np.float64)
    n, d = X.shape
    if not 1 <= k <= d:
        raise DimredError(f"k must be in [1, {d}], got {k}")
    mean = X.mean(axis=0)
    Xc = X - mean
    denom = max(n - 1, 1)
    C = (Xc.T @ Xc) / denom
    total_var = float(np.trace(C))

    rng = np.random.RandomState(0x5EED)
    components = []
    eigvals = []
    for _ in range(k):
        v, lam = _leading_eigenvector(C, components, rng)
        components.append(v)
        eigvals.append(lam)
        C = C - lam * np.outer(v, v)

    # near-degenerate spectra can surface marginally out of order; sort to
    # keep the variance fractions non-increasing
    order = np.argsort(-np.array(eigvals), kind="stable")
    comp = np.array([_fix_sign(components[i]) for i in order])
    eig = np.array([eigvals[i] for i in order])
    fractions = eig / total_var if total_var > 0 else np.zeros(k)
    return PcaModel(mean=mean, components=comp, variance_fractions=fractions)
