import numpy as np
import pytest
from scipy.stats import rankdata

from softts.reporting import (
    CoverageError,
    RankReport,
    aggregate_table,
    critical_difference,
    holm_correction,
    list_model_labels,
    model_label,
    plot_cd_diagram,
    plot_scatter_compare,
    plot_tsne,
    write_ranks_csv,
    write_table_csv,
)


def record(dataset, method, acc, model="lstm_fcn", depth=None, seed=0, **extra):
    rec = {
        "dataset": dataset,
        "model": model,
        "depth": depth,
        "method": method,
        "seed": seed,
        "gamma": None,
        "beta": None,
        "tau": None,
        "epsilon": None,
        "best_accuracy": acc,
        "eval_points": [[5, acc]],
        "wall_time": 1.0,
    }
    rec.update(extra)
    return rec


def grid_records(acc_by_dataset_method, model="lstm_fcn", depth=None, seeds=(0,)):
    records = []
    for dataset, by_method in acc_by_dataset_method.items():
        for method, acc in by_method.items():
            for seed in seeds:
                records.append(record(dataset, method, acc, model=model, depth=depth, seed=seed))
    return records


def test_model_labels_derive_from_architecture_and_depth():
    assert model_label(record("A", "baseline", 0.5, model="inception", depth=6)) == "inceptiontime"
    assert model_label(record("A", "baseline", 0.5, model="inception", depth=1)) == "inceptiontime-1"
    assert sorted(
        list_model_labels(
            [record("A", "baseline", 0.5), record("A", "baseline", 0.5, model="resnet18")]
        )
    ) == ["lstm_fcn", "resnet18"]


def test_aggregate_means_over_seeds_then_datasets():
    records = [
        record("A", "baseline", 0.8, seed=0),
        record("A", "baseline", 0.6, seed=1),
        record("B", "baseline", 1.0, seed=0),
        record("B", "baseline", 1.0, seed=1),
    ]
    table = aggregate_table(records, "lstm_fcn")
    # dataset A averages to 0.7, B to 1.0, grand mean 0.85
    assert table.means["baseline"] == pytest.approx(0.85)
    assert table.datasets == ["A", "B"]


def test_aggregate_is_order_invariant():
    records = grid_records(
        {"A": {"baseline": 0.7, "ss": 0.9}, "B": {"baseline": 0.5, "ss": 0.6}}
    )
    fwd = aggregate_table(records, "lstm_fcn")
    rev = aggregate_table(records[::-1], "lstm_fcn")
    assert fwd.means == rev.means


def test_aggregate_ignores_diverged_records():
    records = grid_records({"A": {"baseline": 0.7, "ss": 0.9}})
    records.append(record("A", "baseline", 0.0, diverged=True, error="non-finite loss"))
    table = aggregate_table(records, "lstm_fcn")
    assert table.means["baseline"] == pytest.approx(0.7)


def test_coverage_gap_names_the_missing_cell():
    records = grid_records({"A": {"baseline": 0.7, "ss": 0.9}, "B": {"baseline": 0.5}})
    with pytest.raises(CoverageError, match="ss:B"):
        aggregate_table(records, "lstm_fcn")


def test_method_columns_follow_canonical_order():
    records = grid_records({"A": {"cp": 0.1, "ss": 0.2, "baseline": 0.3, "ls": 0.4}})
    table = aggregate_table(records, "lstm_fcn")
    assert table.methods == ["baseline", "ss", "ls", "cp"]


def test_ranks_match_hand_enumeration():
    # three datasets, accuracies chosen so the per-dataset ranks are known:
    # A: ss(0.9)=1, ls(0.8)=2, baseline(0.7)=3
    # B: tie between ss and baseline at 0.6 -> 1.5 each, ls(0.5)=3
    # C: baseline(0.9)=1, ss(0.8)=2, ls(0.1)=3
    records = grid_records(
        {
            "A": {"baseline": 0.7, "ss": 0.9, "ls": 0.8},
            "B": {"baseline": 0.6, "ss": 0.6, "ls": 0.5},
            "C": {"baseline": 0.9, "ss": 0.8, "ls": 0.1},
        }
    )
    report = critical_difference(records, "lstm_fcn")
    assert report.average_ranks["ss"] == pytest.approx((1 + 1.5 + 2) / 3)
    assert report.average_ranks["baseline"] == pytest.approx((3 + 1.5 + 1) / 3)
    assert report.average_ranks["ls"] == pytest.approx((2 + 3 + 3) / 3)
    assert report.methods[0] == "ss"  # best average rank first
    total = sum(report.average_ranks.values())
    assert total == pytest.approx(3 * 4 / 2)


def test_fractional_ranks_agree_with_scipy_on_random_matrices():
    rng = np.random.default_rng(40)
    for _ in range(5):
        acc = rng.random((6, 4))
        datasets = {f"D{i}": {f"m{j}": acc[i, j] for j in range(4)} for i in range(6)}
        records = grid_records(datasets)
        report = critical_difference(records, "lstm_fcn")
        methods = sorted(datasets["D0"])  # m0..m3, extras sort lexicographically
        expected = np.vstack([rankdata(-acc[i]) for i in range(6)]).mean(axis=0)
        for j, m in enumerate(methods):
            assert report.average_ranks[m] == pytest.approx(expected[j])


def test_dominant_method_gets_rank_one_everywhere():
    records = grid_records(
        {
            "A": {"baseline": 0.5, "ss": 0.9},
            "B": {"baseline": 0.4, "ss": 0.8},
            "C": {"baseline": 0.3, "ss": 0.7},
            "D": {"baseline": 0.2, "ss": 0.6},
            "E": {"baseline": 0.1, "ss": 0.5},
            "F": {"baseline": 0.15, "ss": 0.55},
        }
    )
    report = critical_difference(records, "lstm_fcn")
    assert report.average_ranks["ss"] == 1.0
    assert report.average_ranks["baseline"] == 2.0
    # six strict wins out of six: the two methods separate, best clique first
    assert report.friedman_pvalue < 0.05
    assert report.cliques == [["ss"], ["baseline"]]


def test_fully_tied_methods_form_one_clique():
    records = grid_records(
        {
            "A": {"baseline": 0.5, "ss": 0.5, "ls": 0.5},
            "B": {"baseline": 0.7, "ss": 0.7, "ls": 0.7},
            "C": {"baseline": 0.9, "ss": 0.9, "ls": 0.9},
        }
    )
    report = critical_difference(records, "lstm_fcn")
    assert report.friedman_pvalue == 1.0
    assert len(report.cliques) == 1
    assert sorted(report.cliques[0]) == ["baseline", "ls", "ss"]
    for m in report.methods:
        assert report.average_ranks[m] == pytest.approx(2.0)


def test_critical_difference_needs_three_datasets():
    records = grid_records({"A": {"baseline": 0.5, "ss": 0.6}, "B": {"baseline": 0.5, "ss": 0.6}})
    with pytest.raises(ValueError, match="3 datasets"):
        critical_difference(records, "lstm_fcn")


def test_holm_correction_hand_example():
    # raw p-values 0.01, 0.02, 0.04 with k=3:
    # adjusted = max-accumulate(3*0.01, 2*0.02, 1*0.04) = 0.03, 0.04, 0.04
    raw = {("a", "b"): 0.01, ("a", "c"): 0.02, ("b", "c"): 0.04}
    adj = holm_correction(raw)
    assert adj[("a", "b")] == pytest.approx(0.03)
    assert adj[("a", "c")] == pytest.approx(0.04)
    assert adj[("b", "c")] == pytest.approx(0.04)


def test_holm_caps_at_one_and_is_monotone():
    raw = {("a", "b"): 0.5, ("a", "c"): 0.6, ("b", "c"): 0.9}
    adj = holm_correction(raw)
    assert adj[("a", "b")] == pytest.approx(1.0)
    assert adj[("a", "c")] == 1.0 and adj[("b", "c")] == 1.0


def test_table_csv_golden(tmp_path):
    records = grid_records(
        {"A": {"baseline": 0.75, "ss": 0.85}, "B": {"baseline": 0.55, "ss": 0.65}}
    )
    table = aggregate_table(records, "lstm_fcn")
    path = tmp_path / "table.csv"
    write_table_csv([table], str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "model,datasets,baseline,ss"
    assert lines[1] == "lstm_fcn,2,0.6500,0.7500"


def test_ranks_csv_structure(tmp_path):
    records = grid_records(
        {
            "A": {"baseline": 0.7, "ss": 0.9},
            "B": {"baseline": 0.6, "ss": 0.8},
            "C": {"baseline": 0.5, "ss": 0.7},
        }
    )
    report = critical_difference(records, "lstm_fcn")
    path = tmp_path / "ranks.csv"
    write_ranks_csv([report], str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "model,method,average_rank,friedman_pvalue,clique"
    assert len(lines) == 3
    assert lines[1].startswith("lstm_fcn,ss,1.0000")


def test_figures_are_written_and_deterministic(tmp_path):
    records = grid_records(
        {
            "A": {"baseline": 0.7, "ss": 0.9},
            "B": {"baseline": 0.6, "ss": 0.8},
            "C": {"baseline": 0.5, "ss": 0.7},
        }
    )
    report = critical_difference(records, "lstm_fcn")
    cd1 = tmp_path / "cd1.svg"
    cd2 = tmp_path / "cd2.svg"
    plot_cd_diagram([report], str(cd1))
    plot_cd_diagram([report], str(cd2))
    assert cd1.read_bytes() == cd2.read_bytes()
    assert b"<svg" in cd1.read_bytes()

    scatter = tmp_path / "scatter.svg"
    plot_scatter_compare(records, "lstm_fcn", str(scatter))
    assert scatter.exists()

    rng = np.random.default_rng(0)
    coords = rng.standard_normal((10, 2))
    labels = np.array([0] * 5 + [1] * 5)
    tsne_path = tmp_path / "tsne.svg"
    plot_tsne([("baseline", coords, labels), ("ss", coords, labels)], str(tsne_path))
    assert tsne_path.exists()


def test_scatter_requires_both_methods(tmp_path):
    records = grid_records({"A": {"baseline": 0.7}})
    with pytest.raises(CoverageError, match="ss"):
        plot_scatter_compare(records, "lstm_fcn", str(tmp_path / "s.svg"))


def test_two_method_gate_uses_wilcoxon():
    # identical columns except one dataset: gate should not fire
    records = grid_records(
        {
            "A": {"baseline": 0.5, "ss": 0.6},
            "B": {"baseline": 0.5, "ss": 0.5},
            "C": {"baseline": 0.5, "ss": 0.5},
        }
    )
    report = critical_difference(records, "lstm_fcn")
    assert report.friedman_pvalue > 0.05
    assert len(report.cliques) == 1
