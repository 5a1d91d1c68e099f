import json

import numpy as np
import pytest
import torch

import softts.training as training
from softts.dataset_io import LabeledDataset
from softts.losses import MethodConfig
from softts.models import ModelSpec
from softts.softlabel import build_soft_labels
from softts.training import (
    TrainConfig,
    append_result,
    completed_keys,
    evaluate_accuracy,
    read_results,
    run_experiment,
)


class FixedLogits(torch.nn.Module):
    """Stub classifier that replays a fixed logits matrix."""

    def __init__(self, logits):
        super().__init__()
        self.logits = torch.tensor(logits, dtype=torch.float32)

    def forward(self, x):
        return self.logits[: x.shape[0]], self.logits[: x.shape[0]]


def toy_splits(n=24, t=64, classes=3, seed=0):
    rng = np.random.default_rng(seed)
    label_map = {str(i + 1): i for i in range(classes)}
    labels = np.arange(n) % classes
    base = rng.standard_normal((classes, t)) * 2
    make = lambda: base[labels] + 0.3 * rng.standard_normal((n, t))
    train = LabeledDataset("toy", "train", make(), labels, label_map)
    test = LabeledDataset("toy", "test", make(), labels.copy(), label_map)
    return train, test


def small_spec(train, **kw):
    defaults = dict(
        architecture="lstm_fcn",
        num_classes=train.num_classes,
        input_length=train.length,
        seed=0,
        base_channels=8,
    )
    defaults.update(kw)
    return ModelSpec(**defaults)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError, match="optimizer"):
        TrainConfig(optimizer="sgd")
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)


def test_evaluate_accuracy_counts_correct_argmax():
    ds = LabeledDataset(
        "t", "test", np.zeros((10, 4)), np.array([0] * 7 + [1] * 3), {"a": 0, "b": 1}
    )
    logits = np.zeros((10, 2))
    logits[:7, 0] = 1.0  # seven predicted as class 0, three as class 0 too
    model = FixedLogits(logits)
    # rows 7..9 have logits [0, 0]: tie resolves to index 0, so they are wrong
    assert evaluate_accuracy(model, ds) == pytest.approx(0.7)


def test_tie_breaks_toward_lowest_index():
    ds = LabeledDataset("t", "test", np.zeros((2, 4)), np.array([1, 0]), {"a": 0, "b": 1})
    model = FixedLogits(np.zeros((2, 2)))
    assert evaluate_accuracy(model, ds) == pytest.approx(0.5)


def test_eval_schedule_hits_multiples_only():
    train, test = toy_splits()
    config = TrainConfig(epochs=20, eval_every=5, seed=1, batch_size=16)
    result = run_experiment(train, test, small_spec(train), MethodConfig(method="baseline"), config)
    assert [e for e, _ in result.eval_points] == [5, 10, 15, 20]
    assert result.best_accuracy == pytest.approx(max(a for _, a in result.eval_points))


def test_run_is_deterministic():
    train, test = toy_splits()
    config = TrainConfig(epochs=6, eval_every=2, seed=3, batch_size=8)
    spec = small_spec(train)
    method = MethodConfig(method="baseline")
    r1 = run_experiment(train, test, spec, method, config)
    r2 = run_experiment(train, test, spec, method, config)
    assert r1.eval_points == r2.eval_points
    assert r1.best_accuracy == r2.best_accuracy


def test_seed_changes_the_trace():
    train, test = toy_splits()
    spec = small_spec(train)
    method = MethodConfig(method="baseline")
    r1 = run_experiment(train, test, spec, method, TrainConfig(epochs=6, eval_every=2, seed=0, batch_size=8))
    spec2 = small_spec(train, seed=1)
    r2 = run_experiment(train, test, spec2, method, TrainConfig(epochs=6, eval_every=2, seed=1, batch_size=8))
    assert r1.eval_points != r2.eval_points


def test_ss_records_hyperparameters_and_uses_labels():
    train, test = toy_splits()
    soft = build_soft_labels(train.samples, train.labels, num_classes=train.num_classes)
    config = TrainConfig(epochs=4, eval_every=2, seed=0, batch_size=8)
    result = run_experiment(
        train,
        test,
        small_spec(train),
        MethodConfig(method="ss", beta=0.5, tau=2.0),
        config,
        soft_labels=soft,
    )
    assert result.method == "ss"
    assert result.gamma == pytest.approx(0.001)
    assert result.beta == pytest.approx(0.5)
    assert result.tau == pytest.approx(2.0)
    assert result.epsilon is None
    record = result.to_record()
    assert set(record) == {
        "dataset",
        "model",
        "depth",
        "method",
        "seed",
        "gamma",
        "beta",
        "tau",
        "epsilon",
        "best_accuracy",
        "eval_points",
        "wall_time",
    }


def test_baseline_record_nulls_irrelevant_hyperparameters():
    train, test = toy_splits()
    config = TrainConfig(epochs=2, eval_every=2, seed=0, batch_size=8)
    result = run_experiment(train, test, small_spec(train), MethodConfig(method="baseline"), config)
    assert result.gamma is None and result.beta is None
    assert result.tau is None and result.epsilon is None


def test_ss_without_soft_labels_rejected():
    train, test = toy_splits()
    with pytest.raises(ValueError, match="SoftLabelMatrix"):
        run_experiment(
            train,
            test,
            small_spec(train),
            MethodConfig(method="ss", beta=1.0),
            TrainConfig(epochs=1, seed=0),
        )


def test_misaligned_soft_labels_rejected():
    train, test = toy_splits()
    soft = build_soft_labels(train.samples[:10], train.labels[:10], num_classes=3)
    with pytest.raises(ValueError, match="aligned"):
        run_experiment(
            train,
            test,
            small_spec(train),
            MethodConfig(method="ss", beta=1.0),
            TrainConfig(epochs=1, seed=0),
            soft_labels=soft,
        )


def test_label_map_mismatch_rejected():
    train, test = toy_splits()
    other = LabeledDataset(
        "toy", "test", test.samples, test.labels, {"x": 0, "y": 1, "z": 2}
    )
    with pytest.raises(ValueError, match="label_map"):
        run_experiment(
            train, other, small_spec(train), MethodConfig(method="baseline"), TrainConfig(epochs=1, seed=0)
        )


def test_class_count_mismatch_rejected():
    train, test = toy_splits()
    spec = small_spec(train, num_classes=5)
    with pytest.raises(ValueError, match="classes"):
        run_experiment(train, test, spec, MethodConfig(method="baseline"), TrainConfig(epochs=1, seed=0))


def test_divergence_aborts_with_diagnostic(monkeypatch):
    train, test = toy_splits()

    calls = {"n": 0}
    real = training.method_loss

    def exploding(logits, labels, config, soft_confidences=None):
        calls["n"] += 1
        if calls["n"] >= 3:
            lv = real(logits, labels, config, soft_confidences=soft_confidences)
            bad = lv.total * float("nan")
            return type(lv)(total=bad, ce_part=lv.ce_part, reg_part=lv.reg_part)
        return real(logits, labels, config, soft_confidences=soft_confidences)

    monkeypatch.setattr(training, "method_loss", exploding)
    config = TrainConfig(epochs=10, eval_every=5, seed=0, batch_size=8)
    result = run_experiment(train, test, small_spec(train), MethodConfig(method="baseline"), config)
    assert result.diverged
    assert "non-finite" in result.error
    record = result.to_record()
    assert record["diverged"] is True and "error" in record


def test_checkpoint_saved_when_requested(tmp_path):
    train, test = toy_splits()
    path = tmp_path / "ckpt" / "model.pt"
    run_experiment(
        train,
        test,
        small_spec(train),
        MethodConfig(method="baseline"),
        TrainConfig(epochs=2, eval_every=2, seed=0, batch_size=8),
        checkpoint_path=str(path),
    )
    state = torch.load(str(path), weights_only=True)
    assert any(k.endswith("weight") for k in state)


def test_results_store_append_and_resume(tmp_path):
    path = str(tmp_path / "results.jsonl")
    assert read_results(path) == []
    r1 = {"dataset": "A", "model": "lstm_fcn", "depth": None, "method": "baseline", "seed": 0}
    r2 = {"dataset": "A", "model": "lstm_fcn", "depth": None, "method": "ss", "seed": 0}
    append_result(path, r1)
    append_result(path, r2)
    records = read_results(path)
    assert len(records) == 2 and records[0]["method"] == "baseline"
    keys = completed_keys(path)
    assert ("A", "lstm_fcn", None, "baseline", 0) in keys
    assert ("A", "lstm_fcn", None, "ss", 0) in keys


def test_truncated_final_line_skipped_with_warning(tmp_path):
    path = tmp_path / "results.jsonl"
    good = json.dumps({"dataset": "A", "model": "m", "depth": None, "method": "baseline", "seed": 0})
    path.write_text(good + "\n" + '{"dataset": "B", "mo')
    with pytest.warns(UserWarning, match="truncated"):
        records = read_results(str(path))
    assert len(records) == 1


def test_corrupt_interior_line_is_an_error(tmp_path):
    path = tmp_path / "results.jsonl"
    good = json.dumps({"dataset": "A", "model": "m", "depth": None, "method": "baseline", "seed": 0})
    path.write_text("not json\n" + good + "\n")
    with pytest.raises(ValueError, match="line 1"):
        read_results(str(path))
