"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The active backend is chosen per call: numba when it imported successfully
and the environment variable ``SOFTTS_NO_NUMBA`` is unset/empty, numpy
otherwise.  Both paths are deterministic for fixed inputs.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.spatial.distance import cdist

try:
    from numba import njit, prange

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - mirror environments without numba
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def wrap(func):
            return func

        if len(args) == 1 and callable(args[0]):
            return args[0]
        return wrap

    prange = range


def active_backend() -> str:
    """Return the backend the kernel dispatchers will use right now."""
    if NUMBA_AVAILABLE and not os.environ.get("SOFTTS_NO_NUMBA"):
        return "numba"
    return "numpy"


# ---------------------------------------------------------------------------
# Random convolution features (max activation + proportion of positives).
# Weights for kernel k live in weights[offsets[k]:offsets[k]+lengths[k]].


@njit(cache=True, parallel=True, fastmath=False)
def _conv_features_numba(series, weights, lengths, biases, dilations, offsets):
    n_samples, n_time = series.shape
    n_kernels = lengths.shape[0]
    out = np.empty((n_samples, 2 * n_kernels), dtype=np.float64)
    for i in prange(n_samples):
        for k in range(n_kernels):
            length = lengths[k]
            dilation = dilations[k]
            bias = biases[k]
            off = offsets[k]
            out_len = n_time - (length - 1) * dilation
            best = -np.inf
            positives = 0
            for t in range(out_len):
                acc = bias
                for j in range(length):
                    acc += weights[off + j] * series[i, t + j * dilation]
                if acc > best:
                    best = acc
                if acc > 0.0:
                    positives += 1
            out[i, 2 * k] = best
            out[i, 2 * k + 1] = positives / out_len
    return out


def _conv_features_numpy(series, weights, lengths, biases, dilations, offsets):
    # Accumulates tap by tap in the same order as the numba loop so the two
    # paths agree bit for bit.
    n_samples, n_time = series.shape
    n_kernels = lengths.shape[0]
    out = np.empty((n_samples, 2 * n_kernels), dtype=np.float64)
    for k in range(n_kernels):
        length = int(lengths[k])
        dilation = int(dilations[k])
        off = int(offsets[k])
        out_len = n_time - (length - 1) * dilation
        acc = np.full((n_samples, out_len), biases[k], dtype=np.float64)
        for j in range(length):
            start = j * dilation
            acc += weights[off + j] * series[:, start : start + out_len]
        out[:, 2 * k] = acc.max(axis=1)
        out[:, 2 * k + 1] = np.count_nonzero(acc > 0.0, axis=1) / out_len
    return out


def conv_features(
    series: np.ndarray,
    weights: np.ndarray,
    lengths: np.ndarray,
    biases: np.ndarray,
    dilations: np.ndarray,
    offsets: np.ndarray,
) -> np.ndarray:
    """Apply a bank of dilated valid convolutions, two features per kernel."""
    series = np.ascontiguousarray(series, dtype=np.float64)
    if active_backend() == "numba":
        return _conv_features_numba(series, weights, lengths, biases, dilations, offsets)
    return _conv_features_numpy(series, weights, lengths, biases, dilations, offsets)


# ---------------------------------------------------------------------------
# Per-sample mean euclidean distance to every class.


@njit(cache=True, parallel=True, fastmath=False)
def _class_mean_distances_numba(reps, labels, counts):
    n_samples, n_dim = reps.shape
    n_classes = counts.shape[0]
    out = np.zeros((n_samples, n_classes), dtype=np.float64)
    for m in prange(n_samples):
        sums = np.zeros(n_classes, dtype=np.float64)
        for j in range(n_samples):
            sq = 0.0
            for d in range(n_dim):
                diff = reps[m, d] - reps[j, d]
                sq += diff * diff
            sums[labels[j]] += np.sqrt(sq)
        for c in range(n_classes):
            out[m, c] = sums[c] / counts[c]
    return out


def _class_mean_distances_numpy(reps, labels, counts):
    n_classes = counts.shape[0]
    dist = cdist(reps, reps, metric="euclidean")
    onehot = np.zeros((reps.shape[0], n_classes), dtype=np.float64)
    onehot[np.arange(reps.shape[0]), labels] = 1.0
    return (dist @ onehot) / counts


def class_mean_distances(reps: np.ndarray, labels: np.ndarray, num_classes: int) -> np.ndarray:
    """Mean euclidean distance from each sample to the members of each class.

    Returns an ``N x num_classes`` matrix; the own-class column is included
    (its average counts the zero self-distance) and callers that do not want
    it should mask it out.  Every class must have at least one sample.
    """
    reps = np.ascontiguousarray(reps, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    counts = np.bincount(labels, minlength=num_classes).astype(np.float64)
    if (counts == 0).any():
        empty = np.flatnonzero(counts == 0)
        raise ValueError(f"classes with no samples: {empty.tolist()}")
    if active_backend() == "numba":
        return _class_mean_distances_numba(reps, labels, counts)
    return _class_mean_distances_numpy(reps, labels, counts)
