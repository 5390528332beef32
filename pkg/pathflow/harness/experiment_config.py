# -*- coding: utf-8 -*-
"""
pathflow/harness/experiment_config.py
Experiment protocol settings and their validation.
"""

from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Any, Dict, Mapping, Optional, Tuple

import psutil

from pathflow.core.config import Config
from pathflow.core.exceptions import ConfigurationError
from pathflow.dataio.manifest import Grade, SlideRecord

RATIO_TOLERANCE = 1e-9
MIN_COX_BATCH = 32


class Task(Enum):
    IDH = "idh"
    CODEL = "codel"
    SURVIVAL_CLASS = "survival_class"
    SURVIVAL_COX = "survival_cox"

    @property
    def head(self) -> str:
        return "cox" if self is Task.SURVIVAL_COX else "binary"

    @property
    def is_survival(self) -> bool:
        return self in (Task.SURVIVAL_CLASS, Task.SURVIVAL_COX)


class GradeFilter(Enum):
    ALL = "all"
    II = "II"
    III = "III"
    IV = "IV"

    def matches(self, record: SlideRecord) -> bool:
        return self is GradeFilter.ALL or record.grade is Grade(self.value)


def _parse_ratios(value) -> Tuple[float, float, float]:
    if isinstance(value, str):
        value = [part for part in value.replace(",", " ").split() if part]
    try:
        ratios = tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"Ratios must be three numbers, got {value!r}")
    if len(ratios) != 3:
        raise ConfigurationError(f"Ratios must be (train, val, test), got {ratios}")
    return ratios


def default_workers() -> int:
    return psutil.cpu_count(logical=False) or 1


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One experiment family: task, grade filter, split protocol, patching,
    network shape and SGD hyperparameters
    """
    task: Task = Task.IDH
    grade_filter: GradeFilter = GradeFilter.ALL
    ratios: Tuple[float, float, float] = (0.5, 0.25, 0.25)
    repeats: int = 4
    patches_per_slide: int = 100
    patch_size: int = 64
    epochs: int = 30
    batch_size: int = 64
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-4
    seed: int = 0
    white_thresh: float = 0.85
    var_thresh: float = 0.002
    bootstrap_samples: int = 1000
    stem_channels: int = 16
    stage_widths: Tuple[int, ...] = (16, 32, 64)
    blocks_per_stage: int = 2
    hidden_units: Tuple[int, ...] = ()
    patch_cache: bool = False
    workers: int = field(default_factory=default_workers, compare=False)
    eval_batch_size: int = 256

    def __post_init__(self):
        if any(r <= 0 for r in self.ratios):
            raise ConfigurationError(f"Every split ratio must be positive, got {self.ratios}")
        if abs(sum(self.ratios) - 1.0) > RATIO_TOLERANCE:
            raise ConfigurationError(f"Split ratios must sum to 1, got {self.ratios}")
        for name in ("repeats", "patches_per_slide", "epochs", "blocks_per_stage",
                     "stem_channels", "workers", "eval_batch_size"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.patch_size < 8 or self.patch_size % 2:
            raise ConfigurationError(f"patch_size must be even and >= 8, got {self.patch_size}")
        if self.batch_size < 2:
            raise ConfigurationError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.task is Task.SURVIVAL_COX and self.batch_size < MIN_COX_BATCH:
            raise ConfigurationError(
                f"Cox training needs batch_size >= {MIN_COX_BATCH}, got {self.batch_size}")
        if self.lr <= 0:
            raise ConfigurationError(f"lr must be > 0, got {self.lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ConfigurationError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.bootstrap_samples < 100:
            raise ConfigurationError(f"bootstrap_samples must be >= 100, got {self.bootstrap_samples}")
        if not self.stage_widths or any(w < 1 for w in self.stage_widths):
            raise ConfigurationError(f"stage_widths must be positive, got {self.stage_widths}")
        if any(u < 1 for u in self.hidden_units):
            raise ConfigurationError(f"hidden_units must be positive, got {self.hidden_units}")
        if self.task is Task.CODEL and self.grade_filter is GradeFilter.IV:
            raise ConfigurationError(
                "1p/19q codeletion is not evaluated on grade IV: grade-IV IDH-mutant "
                "codeleted tumours are too rare for a stratified split")

    @property
    def tag(self) -> str:
        """`<task>_<grade>` prefix of every output file"""
        return f"{self.task.value}_{self.grade_filter.value}"

    @classmethod
    def from_mapping(cls, values: Optional[Mapping[str, Any]]) -> "ExperimentConfig":
        """
        Build from a flat mapping (config section or CLI overrides)

        Raises:
            ConfigurationError: Unknown keys or values of the wrong kind
        """
        values = {k: v for k, v in dict(values or {}).items() if v is not None}
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigurationError(f"Unknown experiment keys: {', '.join(unknown)}")

        try:
            if "task" in values:
                values["task"] = Task(values["task"]) if not isinstance(values["task"], Task) else values["task"]
            if "grade_filter" in values:
                grade = values["grade_filter"]
                values["grade_filter"] = grade if isinstance(grade, GradeFilter) else GradeFilter(str(grade))
            if "ratios" in values:
                values["ratios"] = _parse_ratios(values["ratios"])
            for name in ("stage_widths", "hidden_units"):
                if name in values:
                    values[name] = tuple(int(v) for v in (values[name] or ()))
            for name in ("repeats", "patches_per_slide", "patch_size", "epochs", "batch_size", "seed",
                         "bootstrap_samples", "stem_channels", "blocks_per_stage", "workers",
                         "eval_batch_size"):
                if name in values:
                    values[name] = int(values[name])
            for name in ("lr", "momentum", "weight_decay", "white_thresh", "var_thresh"):
                if name in values:
                    values[name] = float(values[name])
            if "patch_cache" in values:
                values["patch_cache"] = bool(values["patch_cache"])
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"Invalid experiment setting: {e}")
        return cls(**values)

    @classmethod
    def from_config(cls, config: Optional[Config] = None,
                    overrides: Optional[Mapping[str, Any]] = None) -> "ExperimentConfig":
        """experiment + runtime sections, then explicit overrides"""
        config = config or Config()
        values: Dict[str, Any] = dict(config.get("experiment", {}) or {})
        runtime = config.get("runtime", {}) or {}
        for key in ("workers", "eval_batch_size"):
            if runtime.get(key) is not None:
                values[key] = runtime[key]
        values.update({k: v for k, v in dict(overrides or {}).items() if v is not None})
        return cls.from_mapping(values)

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return {
            f.name: (getattr(self, f.name).value if isinstance(getattr(self, f.name), Enum)
                     else list(getattr(self, f.name)) if isinstance(getattr(self, f.name), tuple)
                     else getattr(self, f.name))
            for f in fields(self) if f.name != "workers"
        }
