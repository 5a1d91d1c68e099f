"""Classifier architectures for univariate series: InceptionTime at several
depths, LSTM-FCN, and a 1-D ResNet-18.

Every model's forward returns ``(logits, penultimate)`` where penultimate is
the pooled feature vector feeding the linear head.  Construction is seeded
through ``torch.manual_seed`` so equal specs give equal initial weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

ARCHITECTURES = ("inception", "lstm_fcn", "resnet18")
INCEPTION_DEPTHS = (1, 2, 3, 6)
DEFAULT_BASE_CHANNELS = {"inception": 32, "lstm_fcn": 128, "resnet18": 64}


@dataclass(frozen=True)
class ModelSpec:
    """Everything needed to build one classifier deterministically."""

    architecture: str
    num_classes: int
    input_length: int
    seed: int = 0
    inception_depth: int | None = None
    base_channels: int | None = None
    kernel_sizes: tuple[int, int, int] = (40, 20, 10)
    bottleneck_channels: int = 32
    lstm_units: int = 8
    lstm_dropout: float = 0.8

    def __post_init__(self) -> None:
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.num_classes < 2:
            raise ValueError("num_classes must be at least 2")
        if self.input_length < 1:
            raise ValueError("input_length must be positive")
        if self.architecture == "inception":
            if self.inception_depth not in INCEPTION_DEPTHS:
                raise ValueError(f"inception_depth must be one of {INCEPTION_DEPTHS}")
        elif self.inception_depth is not None:
            raise ValueError("inception_depth only applies to the inception architecture")
        if self.base_channels is not None and self.base_channels < 1:
            raise ValueError("base_channels must be positive")
        if any(k < 1 for k in self.kernel_sizes):
            raise ValueError("kernel sizes must be positive")

    @property
    def width(self) -> int:
        return self.base_channels or DEFAULT_BASE_CHANNELS[self.architecture]


@dataclass(frozen=True)
class ClassifierOutput:
    """Batched forward results as plain arrays."""

    logits: np.ndarray
    penultimate: np.ndarray


def canonical_label(architecture: str, depth: int | None) -> str:
    """Reporting identifier: full-depth inception keeps its family name,
    truncated depths get a suffix."""
    if architecture == "inception":
        return "inceptiontime" if depth == 6 else f"inceptiontime-{depth}"
    return architecture


def min_input_length(spec: ModelSpec) -> int:
    if spec.architecture == "inception":
        return max(spec.kernel_sizes)
    if spec.architecture == "lstm_fcn":
        return 8
    # stem, pool and three striding stages each halve the series
    return 32


class SamePadConv1d(nn.Module):
    """Stride-1 convolution with keras-style 'same' padding, so even kernel
    sizes pad one extra step on the right."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, bias: bool = False):
        super().__init__()
        self.pad_left = (kernel_size - 1) // 2
        self.pad_right = kernel_size // 2
        self.conv = nn.Conv1d(in_channels, out_channels, kernel_size, bias=bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(F.pad(x, (self.pad_left, self.pad_right)))


class InceptionModule(nn.Module):
    def __init__(self, in_channels: int, filters: int, kernel_sizes, bottleneck: int):
        super().__init__()
        self.bottleneck = (
            nn.Conv1d(in_channels, bottleneck, 1, bias=False) if in_channels > 1 else None
        )
        conv_in = bottleneck if self.bottleneck is not None else in_channels
        self.convs = nn.ModuleList(
            SamePadConv1d(conv_in, filters, k) for k in kernel_sizes
        )
        self.pool = nn.MaxPool1d(3, stride=1, padding=1)
        self.pool_conv = nn.Conv1d(in_channels, filters, 1, bias=False)
        self.norm = nn.BatchNorm1d(filters * (len(self.convs) + 1))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        z = self.bottleneck(x) if self.bottleneck is not None else x
        branches = [conv(z) for conv in self.convs]
        branches.append(self.pool_conv(self.pool(x)))
        return F.relu(self.norm(torch.cat(branches, dim=1)))


class InceptionNetwork(nn.Module):
    """Stacked inception modules with a residual shortcut every third module."""

    def __init__(self, spec: ModelSpec):
        super().__init__()
        filters = spec.width
        width = filters * 4
        self.depth = spec.inception_depth
        self.modules_list = nn.ModuleList()
        self.shortcuts = nn.ModuleList()
        in_channels = 1
        for d in range(self.depth):
            self.modules_list.append(
                InceptionModule(in_channels, filters, spec.kernel_sizes, spec.bottleneck_channels)
            )
            if d % 3 == 2:
                res_in = 1 if d == 2 else width
                self.shortcuts.append(
                    nn.Sequential(nn.Conv1d(res_in, width, 1, bias=False), nn.BatchNorm1d(width))
                )
            in_channels = width
        self.head = nn.Linear(width, spec.num_classes)
        self.penultimate_dim = width

    def forward(self, x: torch.Tensor):
        x = x.unsqueeze(1)
        residual = x
        shortcut_idx = 0
        for d, module in enumerate(self.modules_list):
            x = module(x)
            if d % 3 == 2:
                x = F.relu(x + self.shortcuts[shortcut_idx](residual))
                residual = x
                shortcut_idx += 1
        pooled = x.mean(dim=-1)
        return self.head(pooled), pooled


class LstmFcn(nn.Module):
    """Parallel recurrent and convolutional branches, concatenated.

    The series enters the LSTM as a single time step with T features (the
    original model's dimension layout); the convolutional branch stacks
    kernels 8/5/3 at widths c, 2c, c and global-average-pools.
    """

    def __init__(self, spec: ModelSpec):
        super().__init__()
        c = spec.width
        self.lstm = nn.LSTM(input_size=spec.input_length, hidden_size=spec.lstm_units, batch_first=True)
        self.dropout = nn.Dropout(spec.lstm_dropout)
        self.conv1 = SamePadConv1d(1, c, 8)
        self.bn1 = nn.BatchNorm1d(c)
        self.conv2 = SamePadConv1d(c, 2 * c, 5)
        self.bn2 = nn.BatchNorm1d(2 * c)
        self.conv3 = SamePadConv1d(2 * c, c, 3)
        self.bn3 = nn.BatchNorm1d(c)
        self.head = nn.Linear(c + spec.lstm_units, spec.num_classes)
        self.penultimate_dim = c + spec.lstm_units

    def forward(self, x: torch.Tensor):
        h, _ = self.lstm(x.unsqueeze(1))
        h = self.dropout(h[:, -1])
        z = x.unsqueeze(1)
        z = F.relu(self.bn1(self.conv1(z)))
        z = F.relu(self.bn2(self.conv2(z)))
        z = F.relu(self.bn3(self.conv3(z)))
        z = z.mean(dim=-1)
        pooled = torch.cat([z, h], dim=1)
        return self.head(pooled), pooled


class BasicBlock1d(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, stride: int):
        super().__init__()
        self.conv1 = nn.Conv1d(in_channels, out_channels, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm1d(out_channels)
        self.conv2 = nn.Conv1d(out_channels, out_channels, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm1d(out_channels)
        if stride != 1 or in_channels != out_channels:
            self.downsample = nn.Sequential(
                nn.Conv1d(in_channels, out_channels, 1, stride=stride, bias=False),
                nn.BatchNorm1d(out_channels),
            )
        else:
            self.downsample = None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        identity = x if self.downsample is None else self.downsample(x)
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + identity)


class ResNet1d18(nn.Module):
    """ResNet-18 translated to one dimension: stem conv7/2 + maxpool, four
    stages of two basic blocks at widths w, 2w, 4w, 8w."""

    def __init__(self, spec: ModelSpec):
        super().__init__()
        w = spec.width
        self.stem = nn.Sequential(
            nn.Conv1d(1, w, 7, stride=2, padding=3, bias=False),
            nn.BatchNorm1d(w),
            nn.ReLU(inplace=True),
            nn.MaxPool1d(3, stride=2, padding=1),
        )
        stages = []
        in_channels = w
        for i, out_channels in enumerate((w, 2 * w, 4 * w, 8 * w)):
            stride = 1 if i == 0 else 2
            stages.append(BasicBlock1d(in_channels, out_channels, stride))
            stages.append(BasicBlock1d(out_channels, out_channels, 1))
            in_channels = out_channels
        self.stages = nn.Sequential(*stages)
        self.head = nn.Linear(8 * w, spec.num_classes)
        self.penultimate_dim = 8 * w

    def forward(self, x: torch.Tensor):
        z = self.stages(self.stem(x.unsqueeze(1)))
        pooled = z.mean(dim=-1)
        return self.head(pooled), pooled


def build_model(spec: ModelSpec) -> nn.Module:
    """Seeded construction; rejects series shorter than the architecture's
    minimum usable length."""
    minimum = min_input_length(spec)
    if spec.input_length < minimum:
        raise ValueError(
            f"{spec.architecture}: input_length {spec.input_length} is below the "
            f"architecture minimum {minimum}"
        )
    torch.manual_seed(spec.seed)
    if spec.architecture == "inception":
        model: nn.Module = InceptionNetwork(spec)
    elif spec.architecture == "lstm_fcn":
        model = LstmFcn(spec)
    else:
        model = ResNet1d18(spec)
    model.spec = spec
    return model


def forward(classifier: nn.Module, batch: np.ndarray, chunk_size: int = 256) -> ClassifierOutput:
    """Deterministic inference over a B x T batch in eval mode."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2:
        raise ValueError("batch must be a B x T matrix")
    expected = getattr(classifier, "spec", None)
    if expected is not None and batch.shape[1] != expected.input_length:
        raise ValueError(
            f"batch length {batch.shape[1]} does not match the model's input_length "
            f"{expected.input_length}"
        )
    was_training = classifier.training
    classifier.eval()
    logits_parts, pen_parts = [], []
    with torch.no_grad():
        for start in range(0, batch.shape[0], chunk_size):
            xb = torch.as_tensor(batch[start : start + chunk_size], dtype=torch.float32)
            logits, penultimate = classifier(xb)
            logits_parts.append(logits.double().numpy())
            pen_parts.append(penultimate.double().numpy())
    if was_training:
        classifier.train()
    return ClassifierOutput(
        logits=np.concatenate(logits_parts), penultimate=np.concatenate(pen_parts)
    )


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
