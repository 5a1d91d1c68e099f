"""Training objectives: plain cross entropy, label smoothing, confidence
penalty, and the soft-label KL objective.

All objectives share the form ``total = ce_part + reg_part`` where ce_part
is cross entropy against the targets the method prescribes and reg_part is
the method's weighted regularizer (zero for baseline and ls).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

METHODS = ("baseline", "ls", "cp", "ss")


@dataclass(frozen=True)
class MethodConfig:
    """Which objective to train with, plus its hyperparameters.

    Fields irrelevant to the chosen method are ignored: epsilon only matters
    for ls, beta for cp/ss, tau for ss.
    """

    method: str
    epsilon: float = 0.1
    beta: float = 0.1
    tau: float = 2.0

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")
        if self.method != "baseline" and not self.beta > 0:
            raise ValueError("beta must be positive for non-baseline methods")
        if self.method == "ss" and not self.tau >= 1.0:
            raise ValueError("tau must be >= 1 for method 'ss'")


@dataclass(frozen=True)
class LossValue:
    """Scalar loss split into its cross-entropy and regularizer parts."""

    total: torch.Tensor
    ce_part: torch.Tensor
    reg_part: torch.Tensor


def _as_2d(t: torch.Tensor) -> torch.Tensor:
    return t.unsqueeze(0) if t.dim() == 1 else t


def _to_tensor(x, dtype=None) -> torch.Tensor:
    t = torch.as_tensor(x)
    if not t.is_floating_point():
        t = t.to(torch.get_default_dtype())
    if dtype is not None:
        t = t.to(dtype)
    return t


def cross_entropy(logits, target) -> LossValue:
    """Mean cross entropy of softmax(logits) against hard or distribution targets.

    ``target`` may be a class index, a vector of indices, or a (batch of)
    probability vector(s).  Probability targets must be nonnegative and sum
    to 1 within 1e-6.
    """
    logits = _as_2d(_to_tensor(logits))
    if not torch.isfinite(logits).all():
        raise ValueError("logits contain non-finite values")
    log_probs = F.log_softmax(logits, dim=-1)
    target_t = torch.as_tensor(target)
    if target_t.dtype in (torch.int8, torch.int16, torch.int32, torch.int64):
        idx = target_t.reshape(-1).long()
        if idx.numel() != logits.shape[0]:
            raise ValueError("number of target indices must match the batch size")
        if (idx < 0).any() or (idx >= logits.shape[1]).any():
            raise ValueError("target class index out of range")
        per_sample = -log_probs[torch.arange(logits.shape[0]), idx]
    else:
        probs = _as_2d(target_t.to(log_probs.dtype))
        if probs.shape != logits.shape:
            raise ValueError("distribution targets must match the logits shape")
        if (probs < 0).any() or (probs.sum(dim=-1) - 1.0).abs().max() > 1e-6:
            raise ValueError("distribution targets must be nonnegative and sum to 1")
        per_sample = -(probs * log_probs).sum(dim=-1)
    ce = per_sample.mean()
    zero = torch.zeros_like(ce)
    return LossValue(total=ce + zero, ce_part=ce, reg_part=zero)


def smooth_targets(hard, num_classes: int, epsilon: float, dtype=torch.float64) -> torch.Tensor:
    """Mix one-hot targets with the uniform distribution:
    (1 - epsilon) * onehot + epsilon / L."""
    if not 0.0 <= epsilon < 1.0:
        raise ValueError("epsilon must lie in [0, 1)")
    if num_classes < 2:
        raise ValueError("num_classes must be at least 2")
    idx = torch.as_tensor(hard).reshape(-1).long()
    if (idx < 0).any() or (idx >= num_classes).any():
        raise ValueError("hard label out of range")
    out = torch.full((idx.numel(), num_classes), epsilon / num_classes, dtype=dtype)
    out[torch.arange(idx.numel()), idx] += 1.0 - epsilon
    return out[0] if torch.as_tensor(hard).dim() == 0 else out


def kl_divergence(p, q) -> torch.Tensor:
    """KL(p || q) over the last axis; rows of p must be distributions and q
    must be strictly positive wherever consulted."""
    p = _to_tensor(p)
    q = _to_tensor(q, dtype=p.dtype)
    if p.shape != q.shape:
        raise ValueError("p and q must have the same shape")
    if (p < 0).any() or (p.sum(dim=-1) - 1.0).abs().max() > 1e-6:
        raise ValueError("p must be a (batch of) probability distribution(s)")
    if (q <= 0).any():
        raise ValueError("q must be strictly positive")
    terms = torch.where(p > 0, p * (torch.log(p.clamp_min(1e-300)) - torch.log(q)), p.new_zeros(()))
    return terms.sum(dim=-1)


def ss_target(confidences, tau: float) -> torch.Tensor:
    """Temperature-softened teacher distribution softmax(confidences / tau)."""
    conf = _as_2d(_to_tensor(confidences))
    return F.softmax(conf / tau, dim=-1)


def method_loss(logits, hard_label, config: MethodConfig, soft_confidences=None) -> LossValue:
    """The training objective for one batch.

    baseline: CE(logits, hard).
    ls:       CE(logits, (1-eps)*onehot + eps/L).
    cp:       CE(logits, hard) + beta * KL(softmax(logits) || uniform).
    ss:       CE(logits, hard) + beta * KL(softmax(a/tau) || softmax(logits/tau)),
              with a the sample's confidence row (requires soft_confidences).
    """
    logits = _as_2d(_to_tensor(logits))
    num_classes = logits.shape[1]
    hard = torch.as_tensor(hard_label).reshape(-1).long()

    if config.method == "baseline":
        return cross_entropy(logits, hard)

    if config.method == "ls":
        targets = smooth_targets(hard, num_classes, config.epsilon, dtype=logits.dtype)
        return cross_entropy(logits, _as_2d(targets))

    ce = cross_entropy(logits, hard).ce_part
    if config.method == "cp":
        probs = F.softmax(logits, dim=-1)
        uniform = torch.full_like(probs, 1.0 / num_classes)
        reg = config.beta * kl_divergence(probs, uniform).mean()
    else:
        if soft_confidences is None:
            raise ValueError("method 'ss' requires soft_confidences aligned with the batch")
        conf = _as_2d(_to_tensor(soft_confidences, dtype=logits.dtype))
        if conf.shape != logits.shape:
            raise ValueError("soft_confidences must match the logits shape")
        teacher = F.softmax(conf.detach() / config.tau, dim=-1)
        student_log = F.log_softmax(logits / config.tau, dim=-1)
        kl = (teacher * (torch.log(teacher) - student_log)).sum(dim=-1)
        reg = config.beta * kl.mean()
    return LossValue(total=ce + reg, ce_part=ce, reg_part=reg)
