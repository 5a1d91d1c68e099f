"""Soft labels built from representation-space distances.

For sample m with true class y, r[m][n] is the mean euclidean distance from
m's representation to the training members of class n.  Foreign classes get
confidence gamma / r[m][n]; the own class gets the sum of the foreign
confidences.  The soft label is the row-wise softmax of the confidences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import class_mean_distances
from .representation import RepresentationMatrix


@dataclass(frozen=True)
class SoftLabelConfig:
    gamma: float = 0.001
    distance_floor: float = 1e-8
    # With 2 classes the construction is exactly uniform; this optional
    # repair adds a margin to the own-class confidence so argmax stays
    # strict.  Off by default: the plain construction is the reference.
    strict_argmax_repair: bool = False
    argmax_margin: float = 1e-6

    def __post_init__(self) -> None:
        if not (self.gamma > 0 and np.isfinite(self.gamma)):
            raise ValueError("gamma must be a positive finite real")
        if not (self.distance_floor > 0 and np.isfinite(self.distance_floor)):
            raise ValueError("distance_floor must be a positive finite real")
        if self.argmax_margin <= 0:
            raise ValueError("argmax_margin must be positive")


@dataclass(frozen=True)
class ClassDistanceTable:
    """N x L mean distances; the own-class entry is NaN (never used)."""

    distances: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "distances", np.asarray(self.distances, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        n, l = self.distances.shape
        if l != self.num_classes or self.labels.shape != (n,):
            raise ValueError("distance table shapes inconsistent")


@dataclass(frozen=True)
class SoftLabelMatrix:
    """Row-stochastic soft labels plus the confidences they came from."""

    probabilities: np.ndarray
    confidences: np.ndarray
    labels: np.ndarray
    gamma: float

    def __post_init__(self) -> None:
        probs = np.asarray(self.probabilities, dtype=np.float64)
        confs = np.asarray(self.confidences, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if probs.shape != confs.shape or probs.ndim != 2:
            raise ValueError("probabilities and confidences must be equal-shape N x L matrices")
        if labels.shape != (probs.shape[0],):
            raise ValueError("labels must align with soft label rows")
        if not (np.isfinite(probs).all() and np.isfinite(confs).all()):
            raise ValueError("soft labels contain non-finite values")
        if (probs <= 0).any():
            raise ValueError("soft label probabilities must be strictly positive")
        if np.abs(probs.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValueError("soft label rows must sum to 1")
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "confidences", confs)
        object.__setattr__(self, "labels", labels)

    @property
    def num_samples(self) -> int:
        return self.probabilities.shape[0]

    @property
    def num_classes(self) -> int:
        return self.probabilities.shape[1]


@dataclass
class ValidationReport:
    num_rows: int
    argmax_failures: list[int] = field(default_factory=list)
    monotonicity_failures: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.argmax_failures and not self.monotonicity_failures

    def summary(self) -> str:
        if self.ok:
            return f"all {self.num_rows} rows satisfy argmax and monotonicity"
        return (
            f"{len(self.argmax_failures)}/{self.num_rows} rows fail strict argmax, "
            f"{len(self.monotonicity_failures)}/{self.num_rows} rows fail monotonicity"
        )


def average_class_distance(
    reps: RepresentationMatrix | np.ndarray,
    labels: np.ndarray,
    num_classes: int | None = None,
    distance_floor: float = 1e-8,
) -> ClassDistanceTable:
    """Mean distance from each sample to each foreign class's members.

    Foreign entries are floored at ``distance_floor`` so duplicated
    representations across classes cannot produce a zero distance; own-class
    entries are set to NaN.
    """
    vectors = reps.vectors if isinstance(reps, RepresentationMatrix) else np.asarray(reps, dtype=np.float64)
    if not np.isfinite(vectors).all():
        raise ValueError("representations contain non-finite values")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (vectors.shape[0],):
        raise ValueError("labels must align with representation rows")
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    if num_classes < 2:
        raise ValueError("need at least 2 classes")
    dist = class_mean_distances(vectors, labels, num_classes)
    dist = np.maximum(dist, distance_floor)
    dist[np.arange(labels.size), labels] = np.nan
    return ClassDistanceTable(distances=dist, labels=labels, num_classes=num_classes)


def confidence_scores(
    table: ClassDistanceTable, config: SoftLabelConfig | None = None
) -> np.ndarray:
    """Turn the distance table into strictly positive confidences.

    Foreign class n gets gamma / r[m][n]; the own class gets the sum of the
    row's foreign confidences (plus a small margin when the strict-argmax
    repair is enabled).
    """
    config = config or SoftLabelConfig()
    n, l = table.distances.shape
    own = np.arange(n), table.labels
    conf = np.empty((n, l), dtype=np.float64)
    foreign = ~np.isnan(table.distances)
    conf[foreign] = config.gamma / table.distances[foreign]
    conf[own] = 0.0
    conf[own] = conf.sum(axis=1)
    if config.strict_argmax_repair:
        conf[own] += config.argmax_margin
    if not np.isfinite(conf).all() or (conf <= 0).any():
        raise ValueError("confidences must be positive and finite; check distance_floor")
    return conf


def soft_labels(
    confidences: np.ndarray, labels: np.ndarray, gamma: float
) -> SoftLabelMatrix:
    """Row-wise stable softmax of the confidence matrix."""
    conf = np.asarray(confidences, dtype=np.float64)
    shifted = conf - conf.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    return SoftLabelMatrix(probabilities=probs, confidences=conf, labels=labels, gamma=gamma)


def build_soft_labels(
    reps: RepresentationMatrix | np.ndarray,
    labels: np.ndarray,
    config: SoftLabelConfig | None = None,
    num_classes: int | None = None,
) -> SoftLabelMatrix:
    """Distance table, confidences and softmax in one step."""
    config = config or SoftLabelConfig()
    table = average_class_distance(
        reps, labels, num_classes=num_classes, distance_floor=config.distance_floor
    )
    conf = confidence_scores(table, config)
    return soft_labels(conf, table.labels, config.gamma)


def validate_criteria(matrix: SoftLabelMatrix) -> ValidationReport:
    """Check every row for strict argmax at the true class and for foreign
    probabilities that decrease strictly with distance (equal distances may
    tie).

    Distances are recovered through the retained confidences: for foreign
    classes confidence is gamma / r, so larger confidence means strictly
    smaller distance and equal confidence means equal distance.
    """
    report = ValidationReport(num_rows=matrix.num_samples)
    for m in range(matrix.num_samples):
        y = matrix.labels[m]
        probs = matrix.probabilities[m]
        foreign = np.flatnonzero(np.arange(matrix.num_classes) != y)
        if not (probs[y] > probs[foreign]).all():
            report.argmax_failures.append(m)
        conf = matrix.confidences[m, foreign]
        p = probs[foreign]
        order = np.argsort(-conf, kind="stable")
        conf_sorted, p_sorted = conf[order], p[order]
        for i in range(len(order) - 1):
            if conf_sorted[i] > conf_sorted[i + 1]:
                if not p_sorted[i] > p_sorted[i + 1]:
                    report.monotonicity_failures.append(m)
                    break
            elif p_sorted[i] != p_sorted[i + 1]:
                report.monotonicity_failures.append(m)
                break
    return report


def save_soft_labels(matrix: SoftLabelMatrix, path: str) -> None:
    """Write ``N L gamma`` then N probability rows then N confidence rows."""
    import os

    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"{matrix.num_samples} {matrix.num_classes} {matrix.gamma:.17g}\n")
        for row in matrix.probabilities:
            handle.write(" ".join(f"{v:.17g}" for v in row) + "\n")
        for row in matrix.confidences:
            handle.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_soft_labels(path: str, labels: np.ndarray) -> SoftLabelMatrix:
    """Read a cache written by :func:`save_soft_labels`.

    ``labels`` must be the training labels the cache was built for; row
    count mismatches are rejected.
    """
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline().split()
        if len(header) != 3:
            raise ValueError(f"{path}: malformed header, expected 'N L gamma'")
        n, l, gamma = int(header[0]), int(header[1]), float(header[2])
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (n,):
            raise ValueError(f"{path}: cache has {n} rows but {labels.size} labels were given")

        def read_block(kind: str) -> np.ndarray:
            block = np.empty((n, l), dtype=np.float64)
            for i in range(n):
                tokens = handle.readline().split()
                if len(tokens) != l:
                    raise ValueError(f"{path}: {kind} row {i} has {len(tokens)} values, expected {l}")
                block[i] = [float(tok) for tok in tokens]
            return block

        probs = read_block("probability")
        confs = read_block("confidence")
        if handle.readline().strip():
            raise ValueError(f"{path}: trailing content after {2 * n} rows")
    return SoftLabelMatrix(probabilities=probs, confidences=confs, labels=labels, gamma=gamma)
