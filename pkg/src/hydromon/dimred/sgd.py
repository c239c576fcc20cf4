"""Stochastic layout optimization kernels.

Compiled with numba and kept single-threaded: reproducibility of the layout
matters more here than wall-clock. Randomness comes from a hand-rolled
xorshift generator living entirely inside the kernel, so results do not
depend on numpy's global state or on library versions.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_CLIP = 4.0


@njit(cache=True, inline="always")
def _xorshift(state: np.uint64) -> np.uint64:
    state ^= state << np.uint64(13)
    state ^= state >> np.uint64(7)
    state ^= state << np.uint64(17)
    return state


@njit(cache=True)
def optimize_layout(
    emb: np.ndarray,
    head: np.ndarray,
    tail: np.ndarray,
    epochs_per_sample: np.ndarray,
    n_epochs: int,
    a: float,
    b: float,
    gamma: float,
    negative_sample_rate: int,
    rng_state: np.uint64,
) -> None:
    """Attraction along sampled edges plus negative-sample repulsion, in place."""
    n, dim = emb.shape
    alpha0 = 1.0
    alpha = alpha0
    epoch_of_next_sample = epochs_per_sample.copy()
    epochs_per_negative = epochs_per_sample / negative_sample_rate
    epoch_of_next_negative = epochs_per_negative.copy()
    state = rng_state

    for epoch in range(n_epochs):
        for e in range(head.shape[0]):
            if epoch_of_next_sample[e] > epoch:
                continue
            j = head[e]
            kk = tail[e]
            d2 = 0.0
            for c in range(dim):
                diff = emb[j, c] - emb[kk, c]
                d2 += diff * diff
            if d2 > 0.0:
                coeff = (-2.0 * a * b * d2 ** (b - 1.0)) / (1.0 + a * d2**b)
            else:
                coeff = 0.0
            for c in range(dim):
                g = coeff * (emb[j, c] - emb[kk, c])
                if g > _CLIP:
                    g = _CLIP
                elif g < -_CLIP:
                    g = -_CLIP
                emb[j, c] += g * alpha
                emb[kk, c] -= g * alpha
            epoch_of_next_sample[e] += epochs_per_sample[e]

            n_neg = int((epoch - epoch_of_next_negative[e]) / epochs_per_negative[e])
            for _ in range(n_neg):
                state = _xorshift(state)
                kk = np.int64(state % np.uint64(n))
                d2 = 0.0
                for c in range(dim):
                    diff = emb[j, c] - emb[kk, c]
                    d2 += diff * diff
                if d2 > 0.0:
                    coeff = (2.0 * gamma * b) / ((0.001 + d2) * (1.0 + a * d2**b))
                elif j == kk:
                    continue
                else:
                    coeff = 0.0
                for c in range(dim):
                    if coeff > 0.0:
                        g = coeff * (emb[j, c] - emb[kk, c])
                        if g > _CLIP:
                            g = _CLIP
                        elif g < -_CLIP:
                            g = -_CLIP
                    else:
                        g = _CLIP
                    emb[j, c] += g * alpha
            epoch_of_next_negative[e] += n_neg * epochs_per_negative[e]
        alpha = alpha0 * (1.0 - (epoch + 1) / n_epochs)


@njit(cache=True)
def optimize_new_points(
    new_emb: np.ndarray,
    train_emb: np.ndarray,
    neighbor_ids: np.ndarray,
    neighbor_weights: np.ndarray,
    n_epochs: int,
    a: float,
    b: float,
) -> None:
    """Attraction-only refinement of new points toward their fixed anchors.

    Each new point is pulled along its neighbor edges with probability given
    by the membership weight schedule; training coordinates never move.
    """
    n_new, k = neighbor_ids.shape
    dim = new_emb.shape[1]
    alpha0 = 1.0
    alpha = alpha0

    w_max = neighbor_weights.max()
    epochs_per_sample = np.empty((n_new, k))
    for i in range(n_new):
        for jn in range(k):
            w = neighbor_weights[i, jn]
            if w > 0.0:
                epochs_per_sample[i, jn] = w_max / w
            else:
                epochs_per_sample[i, jn] = np.inf
    epoch_of_next_sample = epochs_per_sample.copy()

    for epoch in range(n_epochs):
        for i in range(n_new):
            for jn in range(k):
                if epoch_of_next_sample[i, jn] > epoch:
                    continue
                t = neighbor_ids[i, jn]
                d2 = 0.0
                for c in range(dim):
                    diff = new_emb[i, c] - train_emb[t, c]
                    d2 += diff * diff
                if d2 > 0.0:
                    coeff = (-2.0 * a * b * d2 ** (b - 1.0)) / (1.0 + a * d2**b)
                else:
                    coeff = 0.0
                for c in range(dim):
                    g = coeff * (new_emb[i, c] - train_emb[t, c])
                    if g > _CLIP:
                        g = _CLIP
                    elif g < -_CLIP:
                        g = -_CLIP
                    new_emb[i, c] += g * alpha
                epoch_of_next_sample[i, jn] += epochs_per_sample[i, jn]
        alpha = alpha0 * (1.0 - (epoch + 1) / n_epochs)
