"""Fit of the low-dimensional attraction curve 1 / (1 + a * x^(2b)).

The target is the ideal membership profile: exactly 1 inside min_dist, then
exponential decay. Fitting is least squares on a fixed sample grid via a
coarse parameter grid followed by coordinate bisection, no external solver.
"""

from __future__ import annotations

import numpy as np

from hydromon.dimred.pca import DimredError

_X_MAX = 3.0
_X_POINTS = 300
_REFINE_TOL = 1e-6


def _target_profile(x: np.ndarray, min_dist: float) -> np.ndarray:
    y = np.ones_like(x)
    far = x > min_dist
    y[far] = np.exp(-(x[far] - min_dist))
    return y


def _sse(a: float, b: float, x: np.ndarray, y: np.ndarray) -> float:
    f = 1.0 / (1.0 + a * x ** (2.0 * b))
    r = f - y
    return float(r @ r)


def fit_curve(min_dist: float) -> tuple[float, float]:
    """(a, b) minimizing squared error against the ideal membership profile."""
    if not 0.0 < min_dist < 1.0:
        raise DimredError(f"min_dist must lie in (0, 1), got {min_dist}")
    x = np.linspace(0.0, _X_MAX, _X_POINTS)
    x[0] = 1e-12  # keep 0**negative out of the way
    y = _target_profile(x, min_dist)

    a_grid = np.linspace(0.05, 10.0, 200)
    b_grid = np.linspace(0.2, 2.5, 200)
    best = (np.inf, 1.0, 1.0)
    for a in a_grid:
        f_base = x[None, :] ** (2.0 * b_grid[:, None])
        errs = ((1.0 / (1.0 + a * f_base) - y[None, :]) ** 2).sum(axis=1)
        j = int(np.argmin(errs))
        if errs[j] < best[0]:
            best = (float(errs[j]), float(a), float(b_grid[j]))
    _, a, b = best

    # coordinate-wise golden-section polish until the step is tiny
    step_a = a_grid[1] - a_grid[0]
    step_b = b_grid[1] - b_grid[0]
    while step_a > _REFINE_TOL or step_b > _REFINE_TOL:
        for cand in (a - step_a, a + step_a):
            if cand > 0 and _sse(cand, b, x, y) < _sse(a, b, x, y):
                a = cand
        for cand in (b - step_b, b + step_b):
            if cand > 0 and _sse(a, cand, x, y) < _sse(a, b, x, y):
                b = cand
        step_a *= 0.5
        step_b *= 0.5
    return a, b
