"""Aggregation of experiment records into tables, rank statistics with a
critical-difference summary, and SVG figures."""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy.stats import friedmanchisquare, rankdata, wilcoxon

from .models import canonical_label

METHOD_ORDER = ("baseline", "ss", "ls", "cp")
DEFAULT_ALPHA = 0.05

plt.rcParams["svg.hashsalt"] = "softts"
_SVG_METADATA = {"Date": None}


class CoverageError(ValueError):
    """Raised when the records do not cover the full dataset x method grid."""


@dataclass
class ResultsTable:
    model: str
    methods: list[str]
    datasets: list[str]
    means: dict[str, float]
    per_dataset: dict[str, dict[str, float]]  # method -> dataset -> mean over seeds


@dataclass
class RankReport:
    model: str
    methods: list[str]  # sorted by average rank, best first
    average_ranks: dict[str, float]
    friedman_pvalue: float
    pairwise_pvalues: dict[tuple[str, str], float]  # Holm-adjusted
    cliques: list[list[str]]
    num_datasets: int
    alpha: float


def model_label(record: dict) -> str:
    return canonical_label(record["model"], record.get("depth"))


def _clean_records(records: list[dict]) -> list[dict]:
    return [r for r in records if not r.get("diverged")]


def _cell_means(records: list[dict], model: str) -> dict[str, dict[str, float]]:
    """method -> dataset -> accuracy averaged over seeds, for one model."""
    cells: dict[str, dict[str, list[float]]] = {}
    for record in _clean_records(records):
        if model_label(record) != model:
            continue
        by_dataset = cells.setdefault(record["method"], {})
        by_dataset.setdefault(record["dataset"], []).append(record["best_accuracy"])
    return {
        method: {ds: float(np.mean(vals)) for ds, vals in by_dataset.items()}
        for method, by_dataset in cells.items()
    }


def _ordered_methods(methods) -> list[str]:
    known = [m for m in METHOD_ORDER if m in methods]
    extras = sorted(m for m in methods if m not in METHOD_ORDER)
    return known + extras


def list_model_labels(records: list[dict]) -> list[str]:
    return sorted({model_label(r) for r in _clean_records(records)})


def aggregate_table(records: list[dict], model: str) -> ResultsTable:
    """Mean accuracy per method over the datasets covered by every method.

    Every method must cover the same dataset set; gaps raise
    :class:`CoverageError` naming the missing cells.
    """
    per_dataset = _cell_means(records, model)
    if not per_dataset:
        raise CoverageError(f"no records for model {model!r}")
    methods = _ordered_methods(per_dataset)
    universe = sorted(set().union(*(per_dataset[m] for m in methods)))
    gaps = [
        (method, ds) for method in methods for ds in universe if ds not in per_dataset[method]
    ]
    if gaps:
        listing = ", ".join(f"{m}:{d}" for m, d in gaps)
        raise CoverageError(f"model {model!r} has uncovered cells: {listing}")
    means = {m: float(np.mean([per_dataset[m][ds] for ds in universe])) for m in methods}
    return ResultsTable(
        model=model, methods=methods, datasets=universe, means=means, per_dataset=per_dataset
    )


def holm_correction(pvalues: dict[tuple[str, str], float]) -> dict[tuple[str, str], float]:
    """Step-down Holm adjustment with monotonicity enforcement."""
    items = sorted(pvalues.items(), key=lambda kv: kv[1])
    adjusted: dict[tuple[str, str], float] = {}
    running = 0.0
    k = len(items)
    for i, (pair, p) in enumerate(items):
        running = max(running, min(1.0, (k - i) * p))
        adjusted[pair] = running
    return adjusted


def _friedman_pvalue(acc: np.ndarray) -> float:
    """Friedman test over a datasets x methods accuracy matrix; fully tied
    data (or a degenerate statistic) counts as no detectable difference."""
    if np.all(acc == acc[:, [0]]):
        return 1.0
    if acc.shape[1] == 2:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result = wilcoxon(acc[:, 0], acc[:, 1], zero_method="wilcox", mode="approx")
        return float(result.pvalue)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        stat, pvalue = friedmanchisquare(*(acc[:, j] for j in range(acc.shape[1])))
    if not np.isfinite(pvalue):
        return 1.0
    return float(pvalue)


def _pairwise_wilcoxon(acc: np.ndarray, methods: list[str]) -> dict[tuple[str, str], float]:
    raw: dict[tuple[str, str], float] = {}
    for i in range(len(methods)):
        for j in range(i + 1, len(methods)):
            diffs = acc[:, i] - acc[:, j]
            if np.all(diffs == 0):
                p = 1.0
            else:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    p = float(wilcoxon(acc[:, i], acc[:, j], zero_method="wilcox", mode="approx").pvalue)
            raw[(methods[i], methods[j])] = p
    return raw


def _cliques(sorted_methods: list[str], adjusted: dict[tuple[str, str], float], alpha: float) -> list[list[str]]:
    """Maximal intervals of the rank ordering whose members are pairwise
    not significantly different."""

    def different(a: str, b: str) -> bool:
        p = adjusted.get((a, b), adjusted.get((b, a), 1.0))
        return p < alpha

    k = len(sorted_methods)
    intervals: list[tuple[int, int]] = []
    for lo in range(k):
        hi = lo
        while hi + 1 < k and not any(
            different(sorted_methods[a], sorted_methods[hi + 1]) for a in range(lo, hi + 1)
        ):
            hi += 1
        intervals.append((lo, hi))
    maximal = [
        (lo, hi)
        for lo, hi in set(intervals)
        if not any((o_lo <= lo and hi <= o_hi and (o_lo, o_hi) != (lo, hi)) for o_lo, o_hi in intervals)
    ]
    return [sorted_methods[lo : hi + 1] for lo, hi in sorted(maximal)]


def critical_difference(
    records: list[dict], model: str, alpha: float = DEFAULT_ALPHA
) -> RankReport:
    """Fractional per-dataset ranks (1 = best accuracy), Friedman gate at
    ``alpha``, then pairwise Wilcoxon with Holm correction to group methods
    into cliques.  Needs at least 3 datasets and 2 methods."""
    table = aggregate_table(records, model)
    if len(table.datasets) < 3:
        raise ValueError(
            f"critical difference needs at least 3 datasets, got {len(table.datasets)}"
        )
    if len(table.methods) < 2:
        raise ValueError("critical difference needs at least 2 methods")
    acc = np.array(
        [[table.per_dataset[m][ds] for m in table.methods] for ds in table.datasets]
    )
    ranks = np.vstack([rankdata(-row, method="average") for row in acc])
    avg = ranks.mean(axis=0)
    order = np.argsort(avg, kind="stable")
    sorted_methods = [table.methods[i] for i in order]
    average_ranks = {m: float(avg[i]) for i, m in enumerate(table.methods)}

    friedman_p = _friedman_pvalue(acc)
    if friedman_p < alpha:
        raw = _pairwise_wilcoxon(acc, table.methods)
        adjusted = holm_correction(raw)
        cliques = _cliques(sorted_methods, adjusted, alpha)
    else:
        adjusted = {}
        cliques = [list(sorted_methods)]
    return RankReport(
        model=model,
        methods=sorted_methods,
        average_ranks=average_ranks,
        friedman_pvalue=friedman_p,
        pairwise_pvalues=adjusted,
        cliques=cliques,
        num_datasets=len(table.datasets),
        alpha=alpha,
    )


# ---------------------------------------------------------------------------
# CSV and figure emission.  All outputs are deterministic functions of the
# records (figures strip their timestamps).


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)


def write_table_csv(tables: list[ResultsTable], path: str) -> None:
    _ensure_parent(path)
    methods = _ordered_methods({m for t in tables for m in t.methods})
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("model,datasets," + ",".join(methods) + "\n")
        for t in tables:
            cells = [f"{t.means[m]:.4f}" if m in t.means else "" for m in methods]
            handle.write(f"{t.model},{len(t.datasets)}," + ",".join(cells) + "\n")


def write_ranks_csv(reports: list[RankReport], path: str) -> None:
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("model,method,average_rank,friedman_pvalue,clique\n")
        for report in reports:
            clique_of = {}
            for idx, clique in enumerate(report.cliques):
                for m in clique:
                    clique_of.setdefault(m, idx)
            for m in report.methods:
                handle.write(
                    f"{report.model},{m},{report.average_ranks[m]:.4f},"
                    f"{report.friedman_pvalue:.6g},{clique_of.get(m, 0)}\n"
                )


def _draw_cd_panel(ax, report: RankReport) -> None:
    k = len(report.methods)
    lo, hi = 1.0, float(k)
    ax.set_xlim(lo - 0.3, hi + 0.3)
    ax.set_ylim(-2.2 - 0.6 * ((k + 1) // 2), 1.6)
    ax.axis("off")
    ax.plot([lo, hi], [0, 0], color="black", lw=1.2)
    for tick in range(1, k + 1):
        ax.plot([tick, tick], [0, 0.18], color="black", lw=1.0)
        ax.text(tick, 0.35, str(tick), ha="center", va="bottom", fontsize=8)
    for i, method in enumerate(report.methods):
        rank = report.average_ranks[method]
        row = i // 2 + 1
        side = -1 if i % 2 == 0 else 1
        x_label = lo - 0.25 if side < 0 else hi + 0.25
        y_label = -0.55 * row - 0.8
        ax.plot([rank, rank, x_label], [0, y_label, y_label], color="black", lw=0.9)
        ax.text(
            x_label,
            y_label + 0.08,
            f"{method} ({rank:.2f})",
            ha="left" if side < 0 else "right",
            va="bottom",
            fontsize=9,
        )
    for idx, clique in enumerate(clq for clq in report.cliques if len(clq) > 1):
        ranks = [report.average_ranks[m] for m in clique]
        y = -0.25 - 0.22 * idx
        ax.plot([min(ranks), max(ranks)], [y, y], color="black", lw=3, solid_capstyle="round")
    ax.set_title(
        f"{report.model} (n={report.num_datasets}, Friedman p={report.friedman_pvalue:.3g})",
        fontsize=10,
    )


def plot_cd_diagram(reports: list[RankReport], path: str) -> None:
    """One panel per model, ranks on a shared 1..k axis with clique bars."""
    _ensure_parent(path)
    fig, axes = plt.subplots(len(reports), 1, figsize=(6.4, 2.2 * len(reports)), squeeze=False)
    for ax, report in zip(axes.ravel(), reports):
        _draw_cd_panel(ax, report)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_METADATA)
    plt.close(fig)


def plot_scatter_compare(
    records: list[dict], model: str, path: str, x_method: str = "baseline", y_method: str = "ss"
) -> None:
    """Per-dataset accuracy of one method against another, diagonal marked."""
    _ensure_parent(path)
    per_dataset = _cell_means(records, model)
    for method in (x_method, y_method):
        if method not in per_dataset:
            raise CoverageError(f"model {model!r} has no records for method {method!r}")
    shared = sorted(set(per_dataset[x_method]) & set(per_dataset[y_method]))
    if not shared:
        raise CoverageError(f"model {model!r}: no datasets shared by {x_method} and {y_method}")
    xs = np.array([per_dataset[x_method][ds] for ds in shared])
    ys = np.array([per_dataset[y_method][ds] for ds in shared])
    fig, ax = plt.subplots(figsize=(4.6, 4.6))
    ax.plot([0, 1], [0, 1], color="gray", lw=1.0, linestyle="--")
    ax.scatter(xs, ys, s=18, color="#1f77b4", alpha=0.85)
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel(f"{x_method} accuracy")
    ax.set_ylabel(f"{y_method} accuracy")
    wins = int((ys > xs).sum())
    losses = int((ys < xs).sum())
    ties = len(shared) - wins - losses
    ax.set_title(f"{model}: {y_method} wins {wins} / ties {ties} / losses {losses}", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_METADATA)
    plt.close(fig)


def plot_tsne(panels: list[tuple[str, np.ndarray, np.ndarray]], path: str, title: str = "") -> None:
    """Side-by-side embedding panels: (panel name, N x 2 coords, labels)."""
    _ensure_parent(path)
    fig, axes = plt.subplots(1, len(panels), figsize=(4.2 * len(panels), 4.2), squeeze=False)
    for ax, (name, coords, labels) in zip(axes.ravel(), panels):
        labels = np.asarray(labels)
        for lab in np.unique(labels):
            pts = coords[labels == lab]
            ax.scatter(pts[:, 0], pts[:, 1], s=12, alpha=0.8, label=str(lab))
        ax.set_title(name, fontsize=10)
        ax.set_xticks([])
        ax.set_yticks([])
        ax.legend(fontsize=7, loc="best")
    if title:
        fig.suptitle(title, fontsize=11)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_METADATA)
    plt.close(fig)


def emit_figures(kind: str, path: str, **data) -> None:
    """Dispatch figure emission by kind: 'cd', 'scatter' or 'tsne'."""
    if kind == "cd":
        plot_cd_diagram(data["reports"], path)
    elif kind == "scatter":
        plot_scatter_compare(
            data["records"],
            data["model"],
            path,
            x_method=data.get("x_method", "baseline"),
            y_method=data.get("y_method", "ss"),
        )
    elif kind == "tsne":
        plot_tsne(data["panels"], path, title=data.get("title", ""))
    else:
        raise ValueError(f"unknown figure kind {kind!r}")
