"""Reading and preprocessing of UCR-2018 style tab-separated archives.

Each dataset is a directory ``<root>/<Name>`` holding ``<Name>_TRAIN.tsv``
and ``<Name>_TEST.tsv``.  Every nonempty line is a label token followed by
tab-separated values; ``NaN`` marks a missing value.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np


class UcrParseError(ValueError):
    """Raised for malformed archive files, with the offending line number."""


@dataclass(frozen=True)
class RawRecord:
    """One line of an archive file: label token plus raw values."""

    label: str
    values: np.ndarray  # 1-D float64, NaN where the file said NaN


@dataclass
class LabeledDataset:
    """A preprocessed split: dense series, integer labels, label mapping."""

    name: str
    split: str
    samples: np.ndarray  # N x T float64
    labels: np.ndarray  # N int64
    label_map: dict[str, int]
    num_classes: int = field(init=False)

    def __post_init__(self) -> None:
        if self.split not in ("train", "test"):
            raise ValueError(f"split must be 'train' or 'test', got {self.split!r}")
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.samples.ndim != 2 or self.samples.shape[0] == 0:
            raise ValueError("samples must be a nonempty N x T matrix")
        if self.labels.shape != (self.samples.shape[0],):
            raise ValueError("labels must align with samples")
        if not np.isfinite(self.samples).all():
            raise ValueError("samples contain non-finite values after preprocessing")
        self.num_classes = len(self.label_map)
        if self.num_classes < 2:
            raise ValueError("need at least 2 distinct classes")
        if sorted(self.label_map.values()) != list(range(self.num_classes)):
            raise ValueError("label_map must be a bijection onto 0..L-1")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("labels out of range for label_map")

    @property
    def num_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def length(self) -> int:
        return self.samples.shape[1]


def parse_ucr_file(path: str) -> list[RawRecord]:
    """Parse one archive file into records, preserving line order.

    Values must be finite numbers or the missing marker ``NaN``.  Malformed
    lines raise :class:`UcrParseError` naming the 1-based line number.
    """
    records: list[RawRecord] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = line.split("\t")
            if len(tokens) < 2:
                raise UcrParseError(f"{path}: line {lineno}: expected a label and at least one value")
            values = np.empty(len(tokens) - 1, dtype=np.float64)
            for i, tok in enumerate(tokens[1:]):
                try:
                    val = float(tok)
                except ValueError:
                    raise UcrParseError(
                        f"{path}: line {lineno}: non-numeric value {tok!r}"
                    ) from None
                if math.isinf(val):
                    raise UcrParseError(f"{path}: line {lineno}: non-finite value {tok!r}")
                values[i] = val
            records.append(RawRecord(label=tokens[0], values=values))
    if not records:
        raise UcrParseError(f"{path}: file contains no records")
    return records


def build_label_map(labels: list[str]) -> dict[str, int]:
    """Map distinct label tokens to 0..L-1.

    Tokens sort numerically when every one parses as a number, otherwise
    lexicographically.
    """
    distinct = sorted(set(labels))
    try:
        distinct.sort(key=lambda tok: (float(tok), tok))
    except ValueError:
        pass
    return {tok: idx for idx, tok in enumerate(distinct)}


def _interpolate_missing(values: np.ndarray) -> np.ndarray:
    missing = np.isnan(values)
    if not missing.any():
        return values
    observed = np.flatnonzero(~missing)
    if observed.size == 0:
        raise ValueError("series has no observed values")
    idx = np.arange(values.size, dtype=np.float64)
    return np.interp(idx, idx[observed], values[observed])


def _znormalize(values: np.ndarray) -> np.ndarray:
    mean = values.mean()
    std = values.std()
    if std < 1e-8:
        return np.zeros_like(values)
    return (values - mean) / std


def preprocess(
    records: list[RawRecord],
    name: str,
    split: str = "train",
    normalize: bool = True,
    label_map: dict[str, int] | None = None,
) -> LabeledDataset:
    """Turn raw records into a dense, gap-free, optionally z-normalized split.

    Missing values are filled by linear interpolation along the time axis.
    Normalization subtracts the per-series mean and divides by the per-series
    population standard deviation; near-constant series become all zeros.
    The train split builds the label map; the test split must reuse it.
    """
    if not records:
        raise ValueError("no records to preprocess")
    lengths = {rec.values.size for rec in records}
    if len(lengths) != 1:
        raise ValueError(f"{name}: series lengths differ across records: {sorted(lengths)}")
    if label_map is None:
        if split != "train":
            raise ValueError("test split requires the train split's label_map")
        label_map = build_label_map([rec.label for rec in records])
    unknown = sorted({rec.label for rec in records} - set(label_map))
    if unknown:
        raise ValueError(f"{name}: labels absent from the train label_map: {unknown}")

    samples = np.empty((len(records), records[0].values.size), dtype=np.float64)
    labels = np.empty(len(records), dtype=np.int64)
    for i, rec in enumerate(records):
        series = _interpolate_missing(rec.values.copy())
        if normalize:
            series = _znormalize(series)
        samples[i] = series
        labels[i] = label_map[rec.label]
    return LabeledDataset(name=name, split=split, samples=samples, labels=labels, label_map=dict(label_map))


def load_dataset_dir(
    directory: str, normalize: bool = True
) -> tuple[LabeledDataset, LabeledDataset]:
    """Load ``<Name>_TRAIN.tsv`` / ``<Name>_TEST.tsv`` from a dataset directory."""
    name = os.path.basename(os.path.normpath(directory))
    train_path = os.path.join(directory, f"{name}_TRAIN.tsv")
    test_path = os.path.join(directory, f"{name}_TEST.tsv")
    for path in (train_path, test_path):
        if not os.path.isfile(path):
            raise FileNotFoundError(f"missing archive file: {path}")
    train = preprocess(parse_ucr_file(train_path), name, "train", normalize=normalize)
    test = preprocess(
        parse_ucr_file(test_path), name, "test", normalize=normalize, label_map=train.label_map
    )
    return train, test


def list_datasets(root: str) -> list[str]:
    """Names of all dataset directories under ``root`` with both split files."""
    if not os.path.isdir(root):
        raise FileNotFoundError(f"archive root does not exist: {root}")
    names = []
    for entry in sorted(os.listdir(root)):
        directory = os.path.join(root, entry)
        if os.path.isfile(os.path.join(directory, f"{entry}_TRAIN.tsv")) and os.path.isfile(
            os.path.join(directory, f"{entry}_TEST.tsv")
        ):
            names.append(entry)
    return names
