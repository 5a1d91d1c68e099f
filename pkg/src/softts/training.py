"""Experiment execution: seeded minibatch training with periodic test
evaluation, plus the append-only JSON-lines results store."""

from __future__ import annotations

import json
import os
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import torch

from .dataset_io import LabeledDataset
from .losses import MethodConfig, method_loss
from .models import ModelSpec, build_model, forward
from .softlabel import SoftLabelMatrix


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    batch_size: int = 128
    learning_rate: float = 0.001
    optimizer: str = "adam"
    eval_every: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1 or self.eval_every < 1:
            raise ValueError("epochs, batch_size and eval_every must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.optimizer != "adam":
            raise ValueError(f"unsupported optimizer {self.optimizer!r}")


@dataclass
class ExperimentResult:
    """One experiment cell: its identity, evaluation trace and outcome."""

    dataset: str
    model: str
    depth: int | None
    method: str
    seed: int
    gamma: float | None
    beta: float | None
    tau: float | None
    epsilon: float | None
    best_accuracy: float
    eval_points: list[tuple[int, float]]
    wall_time: float
    diverged: bool = False
    error: str | None = None

    def to_record(self) -> dict:
        record = {
            "dataset": self.dataset,
            "model": self.model,
            "depth": self.depth,
            "method": self.method,
            "seed": self.seed,
            "gamma": self.gamma,
            "beta": self.beta,
            "tau": self.tau,
            "epsilon": self.epsilon,
            "best_accuracy": self.best_accuracy,
            "eval_points": [[int(e), float(a)] for e, a in self.eval_points],
            "wall_time": self.wall_time,
        }
        if self.diverged:
            record["diverged"] = True
            record["error"] = self.error
        return record


def _relevant_hyperparameters(method_config: MethodConfig, gamma: float | None):
    gamma_out = gamma if method_config.method == "ss" else None
    beta = method_config.beta if method_config.method in ("cp", "ss") else None
    tau = method_config.tau if method_config.method == "ss" else None
    epsilon = method_config.epsilon if method_config.method == "ls" else None
    return gamma_out, beta, tau, epsilon


def evaluate_accuracy(classifier, test_set: LabeledDataset) -> float:
    """Fraction of test samples whose argmax logit (lowest index on ties)
    matches the label."""
    out = forward(classifier, test_set.samples)
    predictions = np.argmax(out.logits, axis=1)
    return float(np.mean(predictions == test_set.labels))


def run_experiment(
    train_set: LabeledDataset,
    test_set: LabeledDataset,
    model_spec: ModelSpec,
    method_config: MethodConfig,
    train_config: TrainConfig,
    soft_labels: SoftLabelMatrix | None = None,
    gamma: float | None = None,
    checkpoint_path: str | None = None,
) -> ExperimentResult:
    """Train one (dataset, model, method, seed) cell and record the best of
    the periodic test accuracies.

    Batch order is reshuffled per epoch from the experiment seed, and the
    test set is scored every ``eval_every`` epochs.  A non-finite loss aborts
    the cell and returns a diagnostic result with the trace so far.
    """
    if train_set.label_map != test_set.label_map:
        raise ValueError("train and test splits disagree on the label_map")
    if model_spec.num_classes != train_set.num_classes:
        raise ValueError(
            f"model expects {model_spec.num_classes} classes but dataset has {train_set.num_classes}"
        )
    if model_spec.input_length != train_set.length:
        raise ValueError(
            f"model expects length {model_spec.input_length} but dataset has {train_set.length}"
        )
    confidences = None
    if method_config.method == "ss":
        if soft_labels is None:
            raise ValueError("method 'ss' requires a SoftLabelMatrix for the train split")
        if soft_labels.num_samples != train_set.num_samples:
            raise ValueError("soft labels are not aligned with the train split")
        if gamma is None:
            gamma = soft_labels.gamma
        confidences = torch.as_tensor(soft_labels.confidences, dtype=torch.float32)

    start = time.monotonic()
    model = build_model(model_spec)
    torch.manual_seed(train_config.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=train_config.learning_rate)
    x_train = torch.as_tensor(train_set.samples, dtype=torch.float32)
    y_train = torch.as_tensor(train_set.labels, dtype=torch.int64)

    gamma_out, beta, tau, epsilon = _relevant_hyperparameters(method_config, gamma)
    eval_points: list[tuple[int, float]] = []
    diverged = False
    error = None

    for epoch in range(1, train_config.epochs + 1):
        rng = np.random.default_rng(train_config.seed + epoch)
        order = rng.permutation(train_set.num_samples)
        model.train()
        for lo in range(0, order.size, train_config.batch_size):
            idx = torch.as_tensor(order[lo : lo + train_config.batch_size])
            logits, _ = model(x_train[idx])
            batch_conf = confidences[idx] if confidences is not None else None
            loss = method_loss(logits, y_train[idx], method_config, soft_confidences=batch_conf)
            if not torch.isfinite(loss.total):
                diverged = True
                error = f"non-finite loss at epoch {epoch}"
                break
            optimizer.zero_grad()
            loss.total.backward()
            optimizer.step()
        if diverged:
            break
        if epoch % train_config.eval_every == 0:
            eval_points.append((epoch, evaluate_accuracy(model, test_set)))

    best = max((acc for _, acc in eval_points), default=0.0)
    if checkpoint_path and not diverged:
        parent = os.path.dirname(checkpoint_path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        torch.save(model.state_dict(), checkpoint_path)
    return ExperimentResult(
        dataset=train_set.name,
        model=model_spec.architecture,
        depth=model_spec.inception_depth,
        method=method_config.method,
        seed=train_config.seed,
        gamma=gamma_out,
        beta=beta,
        tau=tau,
        epsilon=epsilon,
        best_accuracy=best,
        eval_points=eval_points,
        wall_time=time.monotonic() - start,
        diverged=diverged,
        error=error,
    )


# ---------------------------------------------------------------------------
# JSON-lines results store.  One record per line; appends are line-atomic.


def record_key(record: dict) -> tuple:
    return (
        record["dataset"],
        record["model"],
        record.get("depth"),
        record["method"],
        record["seed"],
    )


def append_result(path: str, record: dict) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    line = json.dumps(record, sort_keys=True)
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(line + "\n")
        handle.flush()


def read_results(path: str) -> list[dict]:
    """Load all records; a truncated final line is skipped with a warning,
    corruption anywhere else is an error."""
    if not os.path.exists(path):
        return []
    records: list[dict] = []
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.readlines()
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError:
            if i == len(lines) - 1:
                warnings.warn(f"{path}: skipping truncated final line", stacklevel=2)
            else:
                raise ValueError(f"{path}: corrupt record on line {i + 1}") from None
    return records


def completed_keys(path: str) -> set[tuple]:
    return {record_key(r) for r in read_results(path)}
