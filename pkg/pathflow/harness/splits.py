# -*- coding: utf-8 -*-
"""
pathflow/harness/splits.py
Patient-grouped stratified train/val/test assignment with rotating test windows.

Per class, patients are sorted by id and shuffled once from the 'split'
substream. Repeat r takes the test window [round(r*n*t), round((r+1)*n*t))
(mod n) of that fixed order, the validation block follows it and the rest
trains, so consecutive repeats walk disjoint test quarters.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd

from pathflow.core.exceptions import InsufficientDataError, OutputPathError
from pathflow.core.logger import get_logger
from pathflow.core.seeding import make_rng
from pathflow.dataio.manifest import SlideRecord
from pathflow.harness.experiment_config import ExperimentConfig, Task

logger = get_logger(__name__)

SPLITS = ("train", "val", "test")
MIN_CLASS_SLIDES = 4
POOLED = -1


def task_label(record: SlideRecord, task: Task) -> Optional[int]:
    """Stratification label of a slide; None when the slide is not usable for the task"""
    if task is Task.IDH:
        return record.idh
    if task is Task.CODEL:
        return record.codel if record.idh == 1 else None
    if record.os_days is None or record.event is None:
        return None
    return record.event


def select_task_records(records: Sequence[SlideRecord], cfg: ExperimentConfig) -> List[SlideRecord]:
    """Slides passing the grade filter that carry the task's label"""
    return [r for r in records if cfg.grade_filter.matches(r) and task_label(r, cfg.task) is not None]


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


@dataclass
class SplitAssignment:
    """slide_id -> 'train' | 'val' | 'test' for one repeat"""
    assignment: Dict[str, str]
    seed: int
    repeat: int
    labels: Dict[str, int] = field(default_factory=dict)

    def ids(self, split: str) -> List[str]:
        return sorted(sid for sid, s in self.assignment.items() if s == split)

    def select(self, records: Sequence[SlideRecord], split: str) -> List[SlideRecord]:
        return [r for r in records if self.assignment.get(r.slide_id) == split]

    def counts(self) -> Dict[str, Dict[int, int]]:
        table: Dict[str, Dict[int, int]] = {s: {} for s in SPLITS}
        for sid, split in self.assignment.items():
            label = self.labels.get(sid)
            table[split][label] = table[split].get(label, 0) + 1
        return table

    def to_frame(self, records: Sequence[SlideRecord]) -> pd.DataFrame:
        rows = [
            {"slide_id": r.slide_id, "patient_id": r.patient_id,
             "split": self.assignment[r.slide_id], "label": self.labels.get(r.slide_id)}
            for r in sorted(records, key=lambda r: r.slide_id) if r.slide_id in self.assignment
        ]
        return pd.DataFrame(rows, columns=["slide_id", "patient_id", "split", "label"])

    def write_csv(self, records: Sequence[SlideRecord], path) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            self.to_frame(records).to_csv(path, index=False, lineterminator="\n")
        except OSError as e:
            raise OutputPathError(f"Cannot write split table {path}: {e}")
        return path


def _class_windows(n: int, ratios, repeat: int):
    """(test positions, val positions) in the shuffled order of one class"""
    _, val_ratio, test_ratio = ratios
    start = _round_half_up(repeat * n * test_ratio)
    stop = _round_half_up((repeat + 1) * n * test_ratio)
    n_test = stop - start
    n_val = _round_half_up(n * val_ratio)
    test = [(start + i) % n for i in range(n_test)]
    val = [(stop + i) % n for i in range(n_val)]
    return test, val


def _stratum_problem(class_patients: Sequence[str], patients: Dict[str, List[SlideRecord]],
                     ratios, repeat: int) -> Optional[str]:
    """Why a stratum cannot be split, or None when it can"""
    slide_count = sum(len(patients[p]) for p in class_patients)
    if slide_count < MIN_CLASS_SLIDES:
        return f"has {slide_count} slides; at least {MIN_CLASS_SLIDES} are needed"
    test, val = _class_windows(len(class_patients), ratios, repeat)
    if not test or not val or len(test) + len(val) >= len(class_patients):
        return f"is too small for ratios {ratios}"
    return None


def _event_strata_too_small(by_class: Dict[int, List[str]], patients: Dict[str, List[SlideRecord]],
                            cfg: ExperimentConfig, repeat: int) -> bool:
    if len(by_class) < 2:
        return True
    # decided over all repeats, not just this one
    return any(_stratum_problem(sorted(group), patients, cfg.ratios, r)
               for group in by_class.values() for r in range(max(cfg.repeats, repeat + 1)))


def stratified_split(records: Sequence[SlideRecord], cfg: ExperimentConfig, repeat: int = 0) -> SplitAssignment:
    """
    Assign every slide to train/val/test for one repeat

    Args:
        records: Slides usable for the task (see select_task_records)
        cfg: Experiment settings (task, ratios, seed)
        repeat: Repeat index selecting the rotating test window

    Raises:
        InsufficientDataError: A class has fewer than 4 slides, only one
            class is present, or a split would be empty for a class

    Survival tasks stratify on the event flag. When either event stratum is
    too small for any repeat, or there is only one (no censoring), the
    patients are split as a single pooled stratum.
    """
    labels = {r.slide_id: task_label(r, cfg.task) for r in records}
    patients: Dict[str, List[SlideRecord]] = {}
    for record in sorted(records, key=lambda r: r.slide_id):
        patients.setdefault(record.patient_id, []).append(record)

    by_class: Dict[int, List[str]] = {}
    for patient_id, slides in patients.items():
        by_class.setdefault(labels[slides[0].slide_id], []).append(patient_id)

    if cfg.task.is_survival and _event_strata_too_small(by_class, patients, cfg, repeat):
        # too few deaths or censorings to stratify on; one pooled stratum instead
        logger.warning(f"[SPLIT] {cfg.tag}: event strata {sorted(by_class)} too small, pooling them")
        by_class = {POOLED: [p for group in by_class.values() for p in group]}
    elif len(by_class) < 2:
        raise InsufficientDataError(f"Task {cfg.task.value} needs two classes, found {sorted(by_class)}")

    assignment: Dict[str, str] = {}
    for cls in sorted(by_class):
        class_patients = sorted(by_class[cls])
        problem = _stratum_problem(class_patients, patients, cfg.ratios, repeat)
        if problem:
            raise InsufficientDataError(f"Class {cls} {problem}",
                                        {"task": cfg.task.value, "class": cls,
                                         "patients": len(class_patients)})

        order = make_rng(cfg.seed, "split", cfg.task.value, cls).permutation(len(class_patients))
        shuffled = [class_patients[i] for i in order]
        test, val = _class_windows(len(shuffled), cfg.ratios, repeat)

        split_of = {pos: "test" for pos in test}
        split_of.update({pos: "val" for pos in val})
        for position, patient_id in enumerate(shuffled):
            for record in patients[patient_id]:
                assignment[record.slide_id] = split_of.get(position, "train")

    result = SplitAssignment(assignment=assignment, seed=cfg.seed, repeat=repeat, labels=labels)
    logger.info(f"[SPLIT] {cfg.tag} repeat {repeat}: " + ", ".join(
        f"{s}={len(result.ids(s))}" for s in SPLITS))
    return result
