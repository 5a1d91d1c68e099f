"""Command line pipeline: encode representations, build soft labels, train
the experiment grid, and emit reports.

All pipeline commands are driven by a JSON plan; ``encode`` and ``labels``
additionally accept direct flags for one-off runs.  ``--plan`` takes a file
path or the name of a packaged preset (``paper-full``, ``desk-scale``).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from importlib import resources

import numpy as np
import torch

from .dataset_io import LabeledDataset, list_datasets, load_dataset_dir
from .losses import METHODS, MethodConfig
from .models import ModelSpec, build_model, forward
from .presets import MODEL_PRESETS, method_config_for, model_spec_from_preset
from .representation import EncoderSpec, encode, load_representations, save_representations
from .reporting import (
    aggregate_table,
    critical_difference,
    list_model_labels,
    plot_cd_diagram,
    plot_scatter_compare,
    plot_tsne,
    write_ranks_csv,
    write_table_csv,
)
from .softlabel import (
    SoftLabelConfig,
    build_soft_labels,
    load_soft_labels,
    save_soft_labels,
    validate_criteria,
)
from .training import TrainConfig, append_result, completed_keys, run_experiment
from .tsne import tsne_embed, write_embedding_csv

PRESET_FILES = {"paper-full": "paper_full.json", "desk-scale": "desk_scale.json"}


class PlanError(ValueError):
    """Plan schema violation, prefixed with the offending field path."""


@dataclass
class ExperimentPlan:
    archive_root: str
    output_dir: str
    dataset_names: list[str]
    normalize: bool
    encoder: EncoderSpec
    softlabel: SoftLabelConfig
    models: list[tuple[str, dict]]
    methods: list[tuple[str, dict]]
    train: dict
    report: dict

    def reps_path(self, dataset: str) -> str:
        return os.path.join(self.output_dir, "reps", f"{dataset}.txt")

    def labels_path(self, dataset: str) -> str:
        return os.path.join(self.output_dir, "labels", f"{dataset}.txt")

    @property
    def results_path(self) -> str:
        return os.path.join(self.output_dir, "results.jsonl")

    def checkpoint_path(self, dataset: str, label: str, method: str, seed: int) -> str:
        return os.path.join(
            self.output_dir, "checkpoints", f"{dataset}__{label}__{method}__s{seed}.pt"
        )

    @property
    def report_dir(self) -> str:
        return os.path.join(self.output_dir, "report")


def _require(condition: bool, path: str, message: str) -> None:
    if not condition:
        raise PlanError(f"{path}: {message}")


def _get(section: dict, key: str, default, types, path: str):
    value = section.get(key, default)
    if value is None:
        return None
    _require(isinstance(value, types), f"{path}.{key}", f"expected {types}, got {type(value).__name__}")
    return value


def load_plan(source: str) -> ExperimentPlan:
    """Read and validate a plan file or packaged preset name."""
    if os.path.isfile(source):
        with open(source, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    elif source in PRESET_FILES:
        text = resources.files("softts").joinpath("plans", PRESET_FILES[source]).read_text()
        raw = json.loads(text)
    else:
        raise PlanError(f"plan: {source!r} is neither a file nor one of {sorted(PRESET_FILES)}")
    _require(isinstance(raw, dict), "plan", "top level must be an object")

    archive_root = os.environ.get("SOFTTS_ARCHIVE") or raw.get("archive_root")
    _require(isinstance(archive_root, str) and archive_root, "archive_root", "required string")
    output_dir = raw.get("output_dir")
    _require(isinstance(output_dir, str) and output_dir, "output_dir", "required string")

    data = raw.get("data", {})
    _require(isinstance(data, dict), "data", "must be an object")
    normalize = _get(data, "normalize", True, bool, "data")
    datasets = data.get("datasets", "all")
    if datasets == "all":
        names = list_datasets(archive_root)
        _require(bool(names), "data.datasets", f"no datasets found under {archive_root!r}")
    else:
        _require(
            isinstance(datasets, list) and datasets and all(isinstance(d, str) for d in datasets),
            "data.datasets",
            "expected 'all' or a nonempty list of names",
        )
        names = list(datasets)
        for i, name in enumerate(names):
            directory = os.path.join(archive_root, name)
            _require(
                os.path.isfile(os.path.join(directory, f"{name}_TRAIN.tsv")),
                f"data.datasets[{i}]",
                f"dataset {name!r} not found under {archive_root!r}",
            )

    enc = raw.get("encoder", {})
    _require(isinstance(enc, dict), "encoder", "must be an object")
    kind = _get(enc, "kind", "random_conv", str, "encoder")
    _require(
        kind in ("identity", "random_conv", "precomputed"),
        "encoder.kind",
        f"unknown encoder kind {kind!r}",
    )
    try:
        encoder = EncoderSpec(
            kind=kind,
            file_path=_get(enc, "file_path", None, str, "encoder"),
            num_kernels=_get(enc, "num_kernels", 256, int, "encoder"),
            seed=_get(enc, "seed", 0, int, "encoder"),
            pooling=_get(enc, "pooling", "max", str, "encoder"),
        )
    except ValueError as exc:
        raise PlanError(f"encoder: {exc}") from None

    soft = raw.get("softlabel", {})
    _require(isinstance(soft, dict), "softlabel", "must be an object")
    try:
        softlabel = SoftLabelConfig(
            gamma=float(_get(soft, "gamma", 0.001, (int, float), "softlabel")),
            distance_floor=float(_get(soft, "distance_floor", 1e-8, (int, float), "softlabel")),
            strict_argmax_repair=_get(soft, "strict_argmax_repair", False, bool, "softlabel"),
        )
    except ValueError as exc:
        raise PlanError(f"softlabel: {exc}") from None

    raw_models = raw.get("models")
    _require(isinstance(raw_models, list) and raw_models, "models", "required nonempty list")
    models: list[tuple[str, dict]] = []
    for i, entry in enumerate(raw_models):
        if isinstance(entry, str):
            name, overrides = entry, {}
        elif isinstance(entry, dict):
            name = entry.get("name")
            _require(isinstance(name, str), f"models[{i}].name", "required string")
            overrides = {k: v for k, v in entry.items() if k != "name"}
            if "kernel_sizes" in overrides:
                overrides["kernel_sizes"] = tuple(overrides["kernel_sizes"])
        else:
            raise PlanError(f"models[{i}]: expected a preset name or an object")
        _require(
            name in MODEL_PRESETS,
            f"models[{i}].name" if isinstance(entry, dict) else f"models[{i}]",
            f"unknown model preset {name!r}, expected one of {sorted(MODEL_PRESETS)}",
        )
        models.append((name, overrides))

    raw_methods = raw.get("methods")
    _require(isinstance(raw_methods, list) and raw_methods, "methods", "required nonempty list")
    methods: list[tuple[str, dict]] = []
    for i, entry in enumerate(raw_methods):
        if isinstance(entry, str):
            name, overrides = entry, {}
        elif isinstance(entry, dict):
            name = entry.get("method")
            overrides = {k: v for k, v in entry.items() if k != "method"}
        else:
            raise PlanError(f"methods[{i}]: expected a method name or an object")
        _require(
            name in METHODS,
            f"methods[{i}].method",
            f"unknown method {name!r}, expected one of {METHODS}",
        )
        methods.append((name, overrides))

    train_raw = raw.get("train", {})
    _require(isinstance(train_raw, dict), "train", "must be an object")
    seeds = train_raw.get("seeds", [0])
    _require(
        isinstance(seeds, list) and seeds and all(isinstance(s, int) for s in seeds),
        "train.seeds",
        "expected a nonempty list of integers",
    )
    train = {
        "epochs": _get(train_raw, "epochs", 1000, int, "train"),
        "batch_size": _get(train_raw, "batch_size", 128, int, "train"),
        "learning_rate": float(_get(train_raw, "learning_rate", 0.001, (int, float), "train")),
        "eval_every": _get(train_raw, "eval_every", 5, int, "train"),
        "seeds": seeds,
        "save_checkpoints": _get(train_raw, "save_checkpoints", False, bool, "train"),
    }

    report_raw = raw.get("report", {})
    _require(isinstance(report_raw, dict), "report", "must be an object")
    tsne_datasets = report_raw.get("tsne_datasets", [])
    _require(
        isinstance(tsne_datasets, list) and all(isinstance(d, str) for d in tsne_datasets),
        "report.tsne_datasets",
        "expected a list of dataset names",
    )
    report = {
        "alpha": float(_get(report_raw, "alpha", 0.05, (int, float), "report")),
        "tsne_datasets": tsne_datasets,
        "tsne_perplexity": _get(report_raw, "tsne_perplexity", None, (int, float), "report"),
    }

    return ExperimentPlan(
        archive_root=archive_root,
        output_dir=output_dir,
        dataset_names=names,
        normalize=normalize,
        encoder=encoder,
        softlabel=softlabel,
        models=models,
        methods=methods,
        train=train,
        report=report,
    )


def _load_splits(plan: ExperimentPlan, dataset: str) -> tuple[LabeledDataset, LabeledDataset]:
    return load_dataset_dir(os.path.join(plan.archive_root, dataset), normalize=plan.normalize)


def _encoder_for_dataset(plan: ExperimentPlan, dataset: str) -> EncoderSpec:
    if plan.encoder.kind != "precomputed":
        return plan.encoder
    path = plan.encoder.file_path.replace("{dataset}", dataset)
    return EncoderSpec(kind="precomputed", file_path=path, pooling=plan.encoder.pooling)


def cmd_encode_plan(plan: ExperimentPlan) -> int:
    for dataset in plan.dataset_names:
        train_set, _ = _load_splits(plan, dataset)
        reps = encode(train_set, _encoder_for_dataset(plan, dataset))
        save_representations(reps, plan.reps_path(dataset))
        print(f"encode: {dataset}: {reps.num_samples} x {reps.dim} -> {plan.reps_path(dataset)}")
    return 0


def cmd_labels_plan(plan: ExperimentPlan) -> int:
    for dataset in plan.dataset_names:
        reps_path = plan.reps_path(dataset)
        if not os.path.isfile(reps_path):
            print(f"labels: {dataset}: missing representations at {reps_path}; run encode first", file=sys.stderr)
            return 1
        train_set, _ = _load_splits(plan, dataset)
        reps = load_representations(reps_path)
        if reps.num_samples != train_set.num_samples:
            print(
                f"labels: {dataset}: {reps_path} has {reps.num_samples} rows for "
                f"{train_set.num_samples} train samples",
                file=sys.stderr,
            )
            return 1
        matrix = build_soft_labels(
            reps, train_set.labels, plan.softlabel, num_classes=train_set.num_classes
        )
        save_soft_labels(matrix, plan.labels_path(dataset))
        report = validate_criteria(matrix)
        print(f"labels: {dataset}: {report.summary()} -> {plan.labels_path(dataset)}")
    return 0


def _cell_list(plan: ExperimentPlan) -> list[dict]:
    cells = []
    for dataset in plan.dataset_names:
        for model_name, model_overrides in plan.models:
            for method_name, method_overrides in plan.methods:
                for seed in plan.train["seeds"]:
                    cells.append(
                        {
                            "dataset": dataset,
                            "model_name": model_name,
                            "model_overrides": model_overrides,
                            "method_name": method_name,
                            "method_overrides": method_overrides,
                            "seed": seed,
                        }
                    )
    return cells


def _cell_key(plan: ExperimentPlan, cell: dict) -> tuple:
    preset = MODEL_PRESETS[cell["model_name"]]
    return (
        cell["dataset"],
        preset["architecture"],
        preset.get("inception_depth"),
        cell["method_name"],
        cell["seed"],
    )


def _run_cell(plan: ExperimentPlan, cell: dict) -> dict:
    train_set, test_set = _load_splits(plan, cell["dataset"])
    model_spec = model_spec_from_preset(
        cell["model_name"],
        num_classes=train_set.num_classes,
        input_length=train_set.length,
        seed=cell["seed"],
        **cell["model_overrides"],
    )
    method_config = method_config_for(
        cell["method_name"], cell["model_name"], **cell["method_overrides"]
    )
    soft = None
    if method_config.method == "ss":
        labels_path = plan.labels_path(cell["dataset"])
        if not os.path.isfile(labels_path):
            raise FileNotFoundError(
                f"soft labels missing at {labels_path}; run the labels command first"
            )
        soft = load_soft_labels(labels_path, train_set.labels)
    checkpoint = (
        plan.checkpoint_path(cell["dataset"], cell["model_name"], cell["method_name"], cell["seed"])
        if plan.train["save_checkpoints"]
        else None
    )
    train_config = TrainConfig(
        epochs=plan.train["epochs"],
        batch_size=plan.train["batch_size"],
        learning_rate=plan.train["learning_rate"],
        eval_every=plan.train["eval_every"],
        seed=cell["seed"],
    )
    result = run_experiment(
        train_set,
        test_set,
        model_spec,
        method_config,
        train_config,
        soft_labels=soft,
        gamma=plan.softlabel.gamma if method_config.method == "ss" else None,
        checkpoint_path=checkpoint,
    )
    return result.to_record()


def _run_cell_payload(payload: tuple) -> dict:
    plan, cell = payload
    return _run_cell(plan, cell)


def cmd_train(plan: ExperimentPlan, resume: bool = False, workers: int = 1) -> int:
    cells = _cell_list(plan)
    done = completed_keys(plan.results_path) if resume else set()
    pending = [c for c in cells if _cell_key(plan, c) not in done]
    skipped = len(cells) - len(pending)
    if skipped:
        print(f"train: resuming, {skipped} of {len(cells)} cells already recorded")
    failures = []
    if workers > 1 and len(pending) > 1:
        import multiprocessing as mp

        ctx = mp.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            futures = {pool.submit(_run_cell_payload, (plan, cell)): cell for cell in pending}
            for future in as_completed(futures):
                record = future.result()
                append_result(plan.results_path, record)
                _announce(record)
                if record.get("diverged"):
                    failures.append(record)
    else:
        for cell in pending:
            record = _run_cell(plan, cell)
            append_result(plan.results_path, record)
            _announce(record)
            if record.get("diverged"):
                failures.append(record)
    if failures:
        print(f"train: {len(failures)} cells diverged:", file=sys.stderr)
        for record in failures:
            print(
                f"  {record['dataset']} {record['model']} depth={record['depth']} "
                f"{record['method']} seed={record['seed']}: {record['error']}",
                file=sys.stderr,
            )
        return 1
    return 0


def _announce(record: dict) -> None:
    status = "DIVERGED" if record.get("diverged") else f"best={record['best_accuracy']:.4f}"
    print(
        f"train: {record['dataset']} {record['model']}"
        f"{'' if record['depth'] is None else '-' + str(record['depth'])} "
        f"{record['method']} seed={record['seed']}: {status} ({record['wall_time']:.1f}s)"
    )


def _tsne_panels(plan: ExperimentPlan, records: list[dict], label: str, dataset: str):
    from .reporting import model_label as record_label

    seed = plan.train["seeds"][0]
    relevant = [
        r
        for r in records
        if record_label(r) == label and r["dataset"] == dataset and r["seed"] == seed
    ]
    if not relevant:
        return None
    # preset names coincide with canonical report labels
    overrides = next((ov for name, ov in plan.models if name == label), None)
    if overrides is None:
        return None
    train_set, test_set = _load_splits(plan, dataset)
    panels = []
    stacked_rows = []
    for method in ("baseline", "ss"):
        ckpt = plan.checkpoint_path(dataset, label, method, seed)
        if not os.path.isfile(ckpt):
            continue
        spec = model_spec_from_preset(
            label,
            num_classes=train_set.num_classes,
            input_length=train_set.length,
            seed=seed,
            **overrides,
        )
        model = build_model(spec)
        model.load_state_dict(torch.load(ckpt, weights_only=True))
        features = forward(model, test_set.samples).penultimate
        perplexity = plan.report["tsne_perplexity"]
        coords = tsne_embed(features, perplexity=perplexity, seed=seed)
        panels.append((method, coords, test_set.labels))
        stacked_rows.append((coords, test_set.labels, method))
    if not panels:
        return None
    return panels, stacked_rows


def cmd_report(plan: ExperimentPlan) -> int:
    from .training import read_results

    records = read_results(plan.results_path)
    if not records:
        print(f"report: no records at {plan.results_path}", file=sys.stderr)
        return 1
    labels = list_model_labels(records)
    tables = [aggregate_table(records, label) for label in labels]
    table_path = os.path.join(plan.report_dir, "table.csv")
    write_table_csv(tables, table_path)
    print(f"report: wrote {table_path}")

    alpha = plan.report["alpha"]
    num_datasets = min(len(t.datasets) for t in tables)
    num_methods = min(len(t.methods) for t in tables)
    if num_datasets >= 3 and num_methods >= 2:
        reports = [critical_difference(records, label, alpha=alpha) for label in labels]
        ranks_path = os.path.join(plan.report_dir, "ranks.csv")
        write_ranks_csv(reports, ranks_path)
        cd_path = os.path.join(plan.report_dir, "cd_diagram.svg")
        plot_cd_diagram(reports, cd_path)
        print(f"report: wrote {ranks_path} and {cd_path}")
    else:
        print(
            f"report: skipping critical difference "
            f"(< 3 datasets or < 2 methods: {num_datasets} datasets, {num_methods} methods)"
        )

    for label in labels:
        table = next(t for t in tables if t.model == label)
        if "baseline" in table.methods and "ss" in table.methods:
            scatter_path = os.path.join(plan.report_dir, f"scatter_{label}.svg")
            plot_scatter_compare(records, label, scatter_path)
            print(f"report: wrote {scatter_path}")
        else:
            print(f"report: skipping scatter for {label} (needs baseline and ss)")

    for dataset in plan.report["tsne_datasets"]:
        for label in labels:
            out = _tsne_panels(plan, records, label, dataset)
            if out is None:
                print(f"report: skipping tsne for {label}/{dataset} (no checkpoints)")
                continue
            panels, stacked = out
            base = os.path.join(plan.report_dir, f"tsne_{label}_{dataset}")
            coords = np.concatenate([c for c, _, _ in stacked])
            labs = np.concatenate([l for _, l, _ in stacked])
            meths = sum(([m] * len(l) for _, l, m in stacked), [])
            write_embedding_csv(base + ".csv", coords, labs, methods=meths)
            plot_tsne(panels, base + ".svg", title=f"{label} on {dataset}")
            print(f"report: wrote {base}.csv and {base}.svg")
    return 0


def cmd_all(plan: ExperimentPlan, resume: bool = False, workers: int = 1) -> int:
    status = cmd_encode_plan(plan)
    if status:
        return status
    if any(name == "ss" for name, _ in plan.methods):
        status = cmd_labels_plan(plan)
        if status:
            return status
    status = cmd_train(plan, resume=resume, workers=workers)
    if status:
        return status
    return cmd_report(plan)


def _direct_encode(args) -> int:
    train_set, _ = load_dataset_dir(args.dataset, normalize=not args.no_normalize)
    spec = EncoderSpec(
        kind=args.encoder,
        file_path=args.reps_file,
        num_kernels=args.kernels,
        seed=args.seed,
    )
    reps = encode(train_set, spec)
    save_representations(reps, args.out)
    print(f"encode: {train_set.name}: {reps.num_samples} x {reps.dim} -> {args.out}")
    return 0


def _direct_labels(args) -> int:
    train_set, _ = load_dataset_dir(args.dataset, normalize=not args.no_normalize)
    reps = load_representations(args.reps)
    if reps.num_samples != train_set.num_samples:
        print(
            f"labels: {args.reps} has {reps.num_samples} rows for "
            f"{train_set.num_samples} train samples",
            file=sys.stderr,
        )
        return 1
    config = SoftLabelConfig(gamma=args.gamma)
    matrix = build_soft_labels(reps, train_set.labels, config, num_classes=train_set.num_classes)
    save_soft_labels(matrix, args.out)
    print(f"labels: {train_set.name}: {validate_criteria(matrix).summary()} -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="softts", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    enc = sub.add_parser("encode", help="encode train-split representations")
    enc.add_argument("--plan")
    enc.add_argument("--dataset", help="dataset directory (direct mode)")
    enc.add_argument(
        "--encoder", choices=["identity", "random_conv", "precomputed"], default="random_conv"
    )
    enc.add_argument("--reps-file", help="source file for --encoder precomputed")
    enc.add_argument("--kernels", type=int, default=256)
    enc.add_argument("--seed", type=int, default=0)
    enc.add_argument("--no-normalize", action="store_true")
    enc.add_argument("--out")

    lab = sub.add_parser("labels", help="build soft labels from representations")
    lab.add_argument("--plan")
    lab.add_argument("--reps", help="representation file (direct mode)")
    lab.add_argument("--dataset", help="dataset directory (direct mode)")
    lab.add_argument("--gamma", type=float, default=0.001)
    lab.add_argument("--no-normalize", action="store_true")
    lab.add_argument("--out")

    for name, help_text in (
        ("train", "run the experiment grid"),
        ("all", "encode, label, train and report"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--plan", required=True)
        cmd.add_argument("--resume", action="store_true")
        cmd.add_argument("--workers", type=int, default=1)

    rep = sub.add_parser("report", help="aggregate records into tables and figures")
    rep.add_argument("--plan", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "encode":
            if args.plan:
                return cmd_encode_plan(load_plan(args.plan))
            if not (args.dataset and args.out):
                print("encode: need --plan or both --dataset and --out", file=sys.stderr)
                return 2
            return _direct_encode(args)
        if args.command == "labels":
            if args.plan:
                return cmd_labels_plan(load_plan(args.plan))
            if not (args.reps and args.dataset and args.out):
                print("labels: need --plan or --reps, --dataset and --out", file=sys.stderr)
                return 2
            return _direct_labels(args)
        plan = load_plan(args.plan)
        if args.command == "train":
            return cmd_train(plan, resume=args.resume, workers=args.workers)
        if args.command == "report":
            return cmd_report(plan)
        return cmd_all(plan, resume=args.resume, workers=args.workers)
    except (PlanError, ValueError, FileNotFoundError) as exc:
        print(f"softts {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
