"""Two-dimensional t-SNE embedding of feature matrices.

Implemented directly in numpy so the embedding is deterministic under a
seed, exactly permutation-equivariant for a matched initialization, and
centered at every iteration.  Permutation exactness requires every
reduction over sample indices to be order-independent, so sums over samples
go through a canonical (value-sorted) summation.
"""

from __future__ import annotations

import numpy as np


def _csum(arr: np.ndarray, axis: int) -> np.ndarray:
    """Sum whose floating-point result does not depend on element order."""
    return np.sort(arr, axis=axis).sum(axis=axis)


def _pairwise_sq_dists(x: np.ndarray) -> np.ndarray:
    norms = (x * x).sum(axis=1)
    sq = norms[:, None] + norms[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(sq, 0.0)
    return np.maximum(sq, 0.0)


def _conditional_probabilities(sq_dists: np.ndarray, perplexity: float) -> np.ndarray:
    """Binary-search each row's precision so its conditional distribution has
    entropy log(perplexity)."""
    n = sq_dists.shape[0]
    target = np.log(perplexity)
    p = np.zeros((n, n))
    for i in range(n):
        row = np.delete(sq_dists[i], i)
        beta, beta_min, beta_max = 1.0, -np.inf, np.inf
        probs = np.zeros(n - 1)
        for _ in range(64):
            w = np.exp(-row * beta)
            total = _csum(w, 0)
            if total <= 0:
                entropy = 0.0
                probs = np.zeros(n - 1)
            else:
                probs = w / total
                entropy = beta * _csum(row * probs, 0) + np.log(total)
            diff = entropy - target
            if abs(diff) < 1e-7:
                break
            if diff > 0:
                beta_min = beta
                beta = beta * 2.0 if beta_max == np.inf else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = beta / 2.0 if beta_min == -np.inf else (beta + beta_min) / 2.0
        p[i, np.arange(n) != i] = probs
    return p


def tsne_embed(
    features: np.ndarray,
    perplexity: float | None = None,
    seed: int = 0,
    num_iterations: int = 1000,
    learning_rate: float | None = None,
    early_exaggeration: float = 12.0,
    init: np.ndarray | None = None,
) -> np.ndarray:
    """Embed N x D features into N x 2 coordinates.

    The output is centered (each axis has zero mean up to 1e-6) and is a
    deterministic function of (features, perplexity, seed, init).  ``init``
    overrides the seeded random initialization; permuting the feature rows
    together with a matched init permutes the output rows exactly.
    ``learning_rate=None`` picks max(N / early_exaggeration / 4, 50).
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 4:
        raise ValueError("need an N x D matrix with at least 4 rows")
    if not np.isfinite(features).all():
        raise ValueError("features contain non-finite values")
    n = features.shape[0]
    if perplexity is None:
        perplexity = min(30.0, (n - 1) / 3.0)
    if not 1.0 <= perplexity:
        raise ValueError("perplexity must be at least 1")
    if n - 1 < 3 * perplexity:
        raise ValueError(f"perplexity {perplexity} too large for {n} samples")
    if learning_rate is None:
        learning_rate = max(n / early_exaggeration / 4.0, 50.0)

    sq = _pairwise_sq_dists(features)
    off_diagonal = sq[~np.eye(n, dtype=bool)]
    if off_diagonal.max() <= 0.0:
        raise ValueError("all feature rows are identical; embedding is degenerate")

    cond = _conditional_probabilities(sq, perplexity)
    p = (cond + cond.T) / (2.0 * n)
    p = np.maximum(p, 1e-12)

    if init is not None:
        y = np.array(init, dtype=np.float64, copy=True)
        if y.shape != (n, 2):
            raise ValueError("init must be an N x 2 matrix")
    else:
        rng = np.random.default_rng(seed)
        y = rng.standard_normal((n, 2)) * 1e-4

    update = np.zeros_like(y)
    gains = np.ones_like(y)
    exaggeration_until = 250
    p_run = p * early_exaggeration

    for iteration in range(num_iterations):
        if iteration == exaggeration_until:
            p_run = p
        sq_y = _pairwise_sq_dists(y)
        w = 1.0 / (1.0 + sq_y)
        np.fill_diagonal(w, 0.0)
        q = np.maximum(w / _csum(w.ravel(), 0), 1e-12)
        # gradient: 4 * sum_j (p_ij - q_ij) w_ij (y_i - y_j)
        coeff = (p_run - q) * w
        row_sums = _csum(coeff, 1)
        cross = _csum(coeff[:, :, None] * y[None, :, :], 1)
        grad = 4.0 * (row_sums[:, None] * y - cross)
        momentum = 0.5 if iteration < 250 else 0.8
        flipped = np.sign(grad) != np.sign(update)
        gains = np.where(flipped, gains + 0.2, gains * 0.8)
        gains = np.maximum(gains, 0.01)
        update = momentum * update - learning_rate * gains * grad
        y += update
        y -= _csum(y, 0) / n
    return y


def write_embedding_csv(path: str, coords: np.ndarray, labels: np.ndarray, methods=None) -> None:
    """Write x,y,label (and optionally method) rows for downstream plotting."""
    import os

    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        if methods is None:
            handle.write("x,y,label\n")
            for (x, y), lab in zip(coords, labels):
                handle.write(f"{x:.17g},{y:.17g},{lab}\n")
        else:
            handle.write("x,y,label,method\n")
            for (x, y), lab, meth in zip(coords, labels, methods):
                handle.write(f"{x:.17g},{y:.17g},{lab},{meth}\n")
