"""Published hyperparameter presets for the model/method grid.

The soft-label KL weight and temperature vary per model family; the other
methods use one setting everywhere.
"""

from __future__ import annotations

from .losses import MethodConfig
from .models import ModelSpec, canonical_label

MODEL_PRESETS: dict[str, dict] = {
    "inceptiontime": {"architecture": "inception", "inception_depth": 6},
    "inceptiontime-3": {"architecture": "inception", "inception_depth": 3},
    "inceptiontime-2": {"architecture": "inception", "inception_depth": 2},
    "inceptiontime-1": {"architecture": "inception", "inception_depth": 1},
    "lstm_fcn": {"architecture": "lstm_fcn"},
    "resnet18": {"architecture": "resnet18"},
}

SS_BETA = {
    "inceptiontime": 1.0,
    "inceptiontime-1": 0.5,
    "inceptiontime-2": 0.5,
    "inceptiontime-3": 0.1,
    "lstm_fcn": 0.1,
    "resnet18": 0.1,
}
SS_TAU = {"resnet18": 4.0}

DEFAULT_GAMMA = 0.001
DEFAULT_EPSILON = 0.1
DEFAULT_CP_BETA = 0.1
DEFAULT_SS_BETA = 0.1
DEFAULT_TAU = 2.0


def model_spec_from_preset(
    name: str, num_classes: int, input_length: int, seed: int = 0, **overrides
) -> ModelSpec:
    if name not in MODEL_PRESETS:
        raise ValueError(f"unknown model preset {name!r}, expected one of {sorted(MODEL_PRESETS)}")
    fields = dict(MODEL_PRESETS[name])
    fields.update(overrides)
    return ModelSpec(num_classes=num_classes, input_length=input_length, seed=seed, **fields)


def method_config_for(method: str, model_label: str, **overrides) -> MethodConfig:
    """Fill a method's hyperparameters from the published per-model table,
    letting explicit overrides win."""
    fields: dict = {"method": method}
    if method == "ls":
        fields["epsilon"] = DEFAULT_EPSILON
    elif method == "cp":
        fields["beta"] = DEFAULT_CP_BETA
    elif method == "ss":
        fields["beta"] = SS_BETA.get(model_label, DEFAULT_SS_BETA)
        fields["tau"] = SS_TAU.get(model_label, DEFAULT_TAU)
    fields.update({k: v for k, v in overrides.items() if v is not None})
    return MethodConfig(**fields)


def label_for_spec(spec: ModelSpec) -> str:
    return canonical_label(spec.architecture, spec.inception_depth)
