"""Experiment configuration files (JSON, schema-checked, versioned)."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from daif.augment import AugmentationConfig, Strategy
from daif.data import SplitSpec
from daif.model import Backbone, ModelConfig
from daif.train import TrainConfig

CONFIG_VERSION = 1

_POS_INT = {"type": "integer", "minimum": 1}
_STRATEGIES = [s.value for s in Strategy]

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "dataset"],
    "properties": {
        "version": {"const": CONFIG_VERSION},
        "dataset": {
            "type": "object",
            "additionalProperties": False,
            "required": ["path"],
            "properties": {
                "path": {"type": "string"},
                "name": {"type": "string"},
                "split": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "mode": {"enum": ["ratio", "ett_months"]},
                        "ratios": {"type": "array", "items": {"type": "number", "minimum": 0},
                                   "minItems": 3, "maxItems": 3},
                    },
                },
            },
        },
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "backbone": {"enum": [b.value for b in Backbone]},
                "lookback": _POS_INT,
                "d_model": _POS_INT,
                "d_ff": _POS_INT,
                "layers": _POS_INT,
                "heads": _POS_INT,
                "share_embedding": {"type": "boolean"},
            },
        },
        "augmentation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "strategy": {"enum": _STRATEGIES},
                "patch_length": _POS_INT,
                "top_k": _POS_INT,
                "jitter_sigma": {"type": "number", "minimum": 0},
                "scaling_sigma": {"type": "number", "minimum": 0},
                "keep_dc": {"type": "boolean"},
            },
        },
        "train": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "learning_rate": {"type": "number", "exclusiveMinimum": 0},
                "batch_size": _POS_INT,
                "max_epochs": _POS_INT,
                "patience": {"type": "integer", "minimum": 0},
                "gradient_clip": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "pred_lengths": {"type": "array", "items": _POS_INT, "minItems": 1},
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "output_dir": {"type": "string"},
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "P": {"type": "array", "items": _POS_INT, "minItems": 1},
                "K": {"type": "array", "items": _POS_INT, "minItems": 1},
            },
        },
    },
}


class ConfigError(ValueError):
    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path


@dataclass
class ExperimentConfig:
    dataset_path: Path
    dataset_name: str
    split: SplitSpec
    model: dict
    augmentation: AugmentationConfig
    train: dict
    pred_lengths: list[int] = field(default_factory=lambda: [96])
    seeds: list[int] = field(default_factory=lambda: [1])
    output_dir: Path = Path("runs")
    sweep: dict[str, list[int]] = field(default_factory=dict)

    def model_config(self, horizon: int, augmentation: AugmentationConfig | None = None) -> ModelConfig:
        return ModelConfig(horizon=horizon, augmentation=augmentation or self.augmentation, **self.model)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(seed=seed, **self.train)

    @property
    def lookback(self) -> int:
        return self.model.get("lookback", 96)


def _path_of(error: jsonschema.ValidationError) -> str:
    parts = "/".join(str(p) for p in error.absolute_path)
    return parts or "<root>"


def parse_config(doc: dict, base_dir: Path = Path(".")) -> ExperimentConfig:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            where = _path_of(err)
            key = extra[0] if extra else "?"
            raise ConfigError(f"{where}/{key}" if where != "<root>" else key,
                              f"unknown key {key!r}")
        raise ConfigError(_path_of(err), err.message)

    ds = doc["dataset"]
    path = Path(ds["path"])
    if not path.is_absolute():
        path = (base_dir / path).resolve()
    model = dict(doc.get("model", {}))
    aug = dict(doc.get("augmentation", {}))
    try:
        split = SplitSpec(**ds.get("split", {}))
        augmentation = AugmentationConfig(**aug)
        # validate model/train values once up front
        ModelConfig(horizon=1, augmentation=augmentation, **model)
        TrainConfig(**doc.get("train", {}))
    except ValueError as exc:
        raise ConfigError("<values>", str(exc)) from exc
    out = Path(doc.get("output_dir", "runs"))
    return ExperimentConfig(
        dataset_path=path,
        dataset_name=ds.get("name", path.stem),
        split=split,
        model=model,
        augmentation=augmentation,
        train=dict(doc.get("train", {})),
        pred_lengths=list(doc.get("pred_lengths", [96])),
        seeds=list(doc.get("seeds", [1])),
        output_dir=out if out.is_absolute() else (base_dir / out).resolve(),
        sweep=dict(doc.get("sweep", {})),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
    return parse_config(doc, path.parent)
