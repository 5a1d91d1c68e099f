"""Encoders that turn series into fixed-width representation vectors.

Three kinds are supported: ``identity`` (the series itself), ``random_conv``
(a bank of random dilated convolution kernels, two features per kernel), and
``precomputed`` (vectors read from a representation file, e.g. produced by an
external contrastive encoder).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .dataset_io import LabeledDataset
from .kernels import conv_features

KERNEL_LENGTHS = (7, 9, 11)


@dataclass(frozen=True)
class EncoderSpec:
    """Configuration of one encoder.

    ``file_path`` is only consulted for ``precomputed``; ``num_kernels`` and
    ``seed`` only for ``random_conv``.
    """

    kind: str
    file_path: str | None = None
    num_kernels: int = 256
    seed: int = 0
    pooling: str = "max"

    def __post_init__(self) -> None:
        if self.kind not in ("identity", "random_conv", "precomputed"):
            raise ValueError(f"unknown encoder kind {self.kind!r}")
        if self.kind == "precomputed" and not self.file_path:
            raise ValueError("precomputed encoder requires file_path")
        if self.num_kernels < 1:
            raise ValueError("num_kernels must be positive")
        if self.pooling != "max":
            raise ValueError(f"unknown pooling {self.pooling!r}")


@dataclass(frozen=True)
class RepresentationMatrix:
    """N x D representation vectors aligned with a dataset's sample order."""

    vectors: np.ndarray

    def __post_init__(self) -> None:
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] == 0 or vectors.shape[1] == 0:
            raise ValueError("representations must form a nonempty N x D matrix")
        if not np.isfinite(vectors).all():
            raise ValueError("representations contain non-finite values")
        object.__setattr__(self, "vectors", vectors)

    @property
    def num_samples(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _draw_kernels(num_kernels: int, input_length: int, seed: int):
    """Draw kernel lengths, weights, biases and dilations from one seed.

    Dilations follow ``2**u`` with ``u`` uniform on ``[0, log2((T-1)/(len-1))]``
    so the receptive field ``(len-1)*dilation + 1`` always fits the series.
    """
    rng = np.random.default_rng(seed)
    usable = [l for l in KERNEL_LENGTHS if l <= input_length]
    if not usable:
        raise ValueError(
            f"input length {input_length} shorter than the smallest kernel ({KERNEL_LENGTHS[0]})"
        )
    lengths = rng.choice(np.asarray(usable, dtype=np.int64), size=num_kernels)
    weights = rng.standard_normal(int(lengths.sum()))
    biases = rng.uniform(-1.0, 1.0, num_kernels)
    max_exp = np.log2((input_length - 1) / (lengths - 1))
    dilations = np.floor(2.0 ** rng.uniform(0.0, max_exp)).astype(np.int64)
    offsets = np.concatenate(([0], np.cumsum(lengths[:-1]))).astype(np.int64)
    return weights, lengths, biases, dilations, offsets


def encode(dataset: LabeledDataset, spec: EncoderSpec) -> RepresentationMatrix:
    """Encode every sample of a dataset into one representation row."""
    if spec.kind == "identity":
        return RepresentationMatrix(dataset.samples.copy())
    if spec.kind == "random_conv":
        weights, lengths, biases, dilations, offsets = _draw_kernels(
            spec.num_kernels, dataset.length, spec.seed
        )
        feats = conv_features(dataset.samples, weights, lengths, biases, dilations, offsets)
        return RepresentationMatrix(feats)
    reps = load_representations(spec.file_path)
    if reps.num_samples != dataset.num_samples:
        raise ValueError(
            f"{spec.file_path}: has {reps.num_samples} rows but dataset "
            f"{dataset.name!r} ({dataset.split}) has {dataset.num_samples} samples"
        )
    return reps


def save_representations(reps: RepresentationMatrix, path: str) -> None:
    """Write an ``N D`` header line then one space-separated row per sample."""
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"{reps.num_samples} {reps.dim}\n")
        for row in reps.vectors:
            handle.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_representations(path: str) -> RepresentationMatrix:
    """Read a representation file written by :func:`save_representations`."""
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: malformed header, expected 'N D'")
        try:
            n, d = int(header[0]), int(header[1])
        except ValueError:
            raise ValueError(f"{path}: malformed header, expected 'N D'") from None
        vectors = np.empty((n, d), dtype=np.float64)
        for i in range(n):
            tokens = handle.readline().split()
            if len(tokens) != d:
                raise ValueError(f"{path}: row {i} has {len(tokens)} values, expected {d}")
            vectors[i] = [float(tok) for tok in tokens]
        if handle.readline().strip():
            raise ValueError(f"{path}: trailing content after {n} rows")
    if not np.isfinite(vectors).all():
        raise ValueError(f"{path}: non-finite representation values")
    return RepresentationMatrix(vectors)
