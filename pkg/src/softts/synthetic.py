"""Generator for small archive-format datasets used in desk-scale runs and
the end-to-end tests.

Each dataset is written in the tab-separated archive layout
(``<root>/<Name>/<Name>_TRAIN.tsv`` and ``_TEST.tsv``) with numeric labels
starting at 1.  Classes differ by waveform family; a per-dataset noise level
keeps the problems non-trivial.
"""

from __future__ import annotations

import argparse
import os

import numpy as np

DEFAULT_LENGTH = 64


def _class_waveform(rng: np.random.Generator, class_idx: int, style: str, length: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, length)
    jitter = rng.uniform(-0.05, 0.05)
    if style == "frequency":
        freq = 2.0 + 2.0 * class_idx
        return np.sin(2 * np.pi * freq * (t + jitter))
    if style == "bump":
        center = 0.2 + 0.3 * class_idx + jitter
        width = 0.05 + 0.02 * class_idx
        return np.exp(-((t - center) ** 2) / (2 * width**2))
    if style == "trend":
        slope = (class_idx - 0.5) * 2.0
        return slope * t + 0.4 * np.sin(2 * np.pi * 3 * (t + jitter))
    if style == "phase":
        phase = class_idx * 2.0 * np.pi / 3.0
        return np.sin(2 * np.pi * 3 * t + phase + jitter)
    if style == "amplitude":
        amp = 0.5 + class_idx
        return amp * np.sin(2 * np.pi * 4 * (t + jitter)) * np.exp(-t)
    raise ValueError(f"unknown style {style!r}")


DESK_DATASETS: dict[str, dict] = {
    "Synth01": {"style": "frequency", "num_classes": 2, "noise": 0.4},
    "Synth02": {"style": "bump", "num_classes": 3, "noise": 0.3},
    "Synth03": {"style": "trend", "num_classes": 2, "noise": 0.5},
    "Synth04": {"style": "phase", "num_classes": 3, "noise": 0.4},
    "Synth05": {"style": "amplitude", "num_classes": 2, "noise": 0.5},
}


def make_split(
    rng: np.random.Generator,
    style: str,
    num_classes: int,
    per_class: int,
    length: int,
    noise: float,
) -> tuple[np.ndarray, np.ndarray]:
    series = []
    labels = []
    for class_idx in range(num_classes):
        for _ in range(per_class):
            base = _class_waveform(rng, class_idx, style, length)
            series.append(base + rng.normal(0.0, noise, length))
            labels.append(class_idx + 1)
    x = np.asarray(series)
    y = np.asarray(labels)
    order = rng.permutation(y.size)
    return x[order], y[order]


def _write_split(path: str, x: np.ndarray, y: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for label, row in zip(y, x):
            handle.write(str(int(label)) + "\t" + "\t".join(f"{v:.6f}" for v in row) + "\n")


def write_dataset(
    root: str,
    name: str,
    style: str,
    num_classes: int,
    seed: int,
    length: int = DEFAULT_LENGTH,
    train_per_class: int = 8,
    test_per_class: int = 12,
    noise: float = 0.4,
) -> str:
    directory = os.path.join(root, name)
    os.makedirs(directory, exist_ok=True)
    rng = np.random.default_rng(seed)
    x_train, y_train = make_split(rng, style, num_classes, train_per_class, length, noise)
    x_test, y_test = make_split(rng, style, num_classes, test_per_class, length, noise)
    _write_split(os.path.join(directory, f"{name}_TRAIN.tsv"), x_train, y_train)
    _write_split(os.path.join(directory, f"{name}_TEST.tsv"), x_test, y_test)
    return directory


def write_archive(root: str, seed: int = 7, length: int = DEFAULT_LENGTH) -> list[str]:
    """Write the five standard desk-scale datasets under ``root``."""
    names = []
    for offset, (name, params) in enumerate(DESK_DATASETS.items()):
        write_dataset(
            root,
            name,
            style=params["style"],
            num_classes=params["num_classes"],
            seed=seed + offset,
            length=length,
            noise=params["noise"],
        )
        names.append(name)
    return names


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Generate the desk-scale synthetic archive.")
    parser.add_argument("--out", required=True, help="archive root directory to create")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--length", type=int, default=DEFAULT_LENGTH)
    args = parser.parse_args(argv)
    names = write_archive(args.out, seed=args.seed, length=args.length)
    print(f"wrote {len(names)} datasets under {args.out}: {', '.join(names)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
