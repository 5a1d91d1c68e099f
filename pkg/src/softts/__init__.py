"""Representation-based soft label smoothing for time series classification."""

from .dataset_io import LabeledDataset, RawRecord, parse_ucr_file, preprocess
from .losses import LossValue, MethodConfig, cross_entropy, kl_divergence, method_loss, smooth_targets
from .models import ClassifierOutput, ModelSpec, build_model, forward
from .representation import (
    EncoderSpec,
    RepresentationMatrix,
    encode,
    load_representations,
    save_representations,
)
from .softlabel import (
    SoftLabelConfig,
    SoftLabelMatrix,
    average_class_distance,
    build_soft_labels,
    confidence_scores,
    soft_labels,
    validate_criteria,
)
from .training import ExperimentResult, TrainConfig, evaluate_accuracy, run_experiment

__version__ = "0.1.0"

__all__ = [
    "LabeledDataset",
    "RawRecord",
    "parse_ucr_file",
    "preprocess",
    "EncoderSpec",
    "RepresentationMatrix",
    "encode",
    "save_representations",
    "load_representations",
    "SoftLabelConfig",
    "SoftLabelMatrix",
    "average_class_distance",
    "confidence_scores",
    "soft_labels",
    "build_soft_labels",
    "validate_criteria",
    "MethodConfig",
    "LossValue",
    "cross_entropy",
    "smooth_targets",
    "kl_divergence",
    "method_loss",
    "ModelSpec",
    "ClassifierOutput",
    "build_model",
    "forward",
    "TrainConfig",
    "ExperimentResult",
    "run_experiment",
    "evaluate_accuracy",
    "__version__",
]
