# -*- coding: utf-8 -*-
"""
pathflow/metrics/classification.py
Confusion statistics, ROC/AUC and the stratified bootstrap for AUC uncertainty.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from sklearn.metrics import auc, roc_auc_score, roc_curve

from pathflow.core.exceptions import ConfigurationError, OutputPathError, UndefinedMetricError
from pathflow.core.seeding import make_rng

MIN_BOOTSTRAP = 100
BOOTSTRAP_CHUNK = 50


@dataclass
class ScoredCohort:
    """
    Scores for a set of subjects with binary labels, or with
    times and events for survival statistics
    """
    scores: np.ndarray
    labels: Optional[np.ndarray] = None
    times: Optional[np.ndarray] = None
    events: Optional[np.ndarray] = None
    subject_ids: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        n = self.scores.size
        if not np.all(np.isfinite(self.scores)):
            raise UndefinedMetricError("Scores must be finite")
        for name in ("labels", "times", "events"):
            value = getattr(self, name)
            if value is not None:
                value = np.asarray(value).reshape(-1)
                if value.size != n:
                    raise UndefinedMetricError(f"{name} length {value.size} does not match {n} scores")
                setattr(self, name, value)
        if self.subject_ids and len(self.subject_ids) != n:
            raise UndefinedMetricError("subject_ids must align with scores")
        if self.labels is not None:
            self.labels = self.labels.astype(np.int64)
            if not np.all((self.labels == 0) | (self.labels == 1)):
                raise UndefinedMetricError("Labels must be 0 or 1")

    def __len__(self) -> int:
        return self.scores.size

    def require_both_classes(self, what: str = "ROC"):
        if self.labels is None:
            raise UndefinedMetricError(f"{what} needs binary labels")
        for cls in (0, 1):
            if not np.any(self.labels == cls):
                raise UndefinedMetricError(f"{what} undefined: class {cls} is missing",
                                           {"missing_class": cls})


@dataclass
class ConfusionStats:
    tp: int
    fn: int
    tn: int
    fp: int

    @property
    def n(self) -> int:
        return self.tp + self.fn + self.tn + self.fp

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.n

    @property
    def sensitivity(self) -> float:
        return self.tp / (self.tp + self.fn)

    @property
    def specificity(self) -> float:
        return self.tn / (self.tn + self.fp)

    def __add__(self, other: "ConfusionStats") -> "ConfusionStats":
        return ConfusionStats(self.tp + other.tp, self.fn + other.fn,
                              self.tn + other.tn, self.fp + other.fp)

    def to_dict(self) -> Dict[str, int]:
        return {"tp": self.tp, "fn": self.fn, "tn": self.tn, "fp": self.fp}


def confusion_counts(pred, truth) -> ConfusionStats:
    """Raw counts; defined for any aligned input"""
    pred = np.asarray(pred, dtype=np.int64).reshape(-1)
    truth = np.asarray(truth, dtype=np.int64).reshape(-1)
    if pred.shape != truth.shape:
        raise UndefinedMetricError(f"Prediction length {pred.size} does not match truth {truth.size}")
    return ConfusionStats(
        tp=int(np.sum((pred == 1) & (truth == 1))),
        fn=int(np.sum((pred == 0) & (truth == 1))),
        tn=int(np.sum((pred == 0) & (truth == 0))),
        fp=int(np.sum((pred == 1) & (truth == 0))),
    )


def confusion_stats(pred, truth) -> ConfusionStats:
    """
    Counts plus accuracy/sensitivity/specificity (positive class = 1)

    Raises:
        UndefinedMetricError: truth holds a single class
    """
    stats = confusion_counts(pred, truth)
    if stats.tp + stats.fn == 0:
        raise UndefinedMetricError("Sensitivity undefined: no positive subjects", {"missing_class": 1})
    if stats.tn + stats.fp == 0:
        raise UndefinedMetricError("Specificity undefined: no negative subjects", {"missing_class": 0})
    return stats


@dataclass
class RocSummary:
    """ROC points in threshold order, AUC and its bootstrap uncertainty"""
    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float
    se: float = 0.0
    ci_low: float = 0.0
    ci_high: float = 1.0
    bootstrap_samples: int = 0

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"threshold": self.thresholds, "fpr": self.fpr, "tpr": self.tpr})


def roc_points(cohort: ScoredCohort):
    cohort.require_both_classes()
    fpr, tpr, thresholds = roc_curve(cohort.labels, cohort.scores, drop_intermediate=False)
    return thresholds, fpr, tpr


def roc_auc(cohort: ScoredCohort, bootstrap_samples: int = 0, seed: int = 0,
            workers: int = 1) -> RocSummary:
    """
    ROC over every distinct score threshold with trapezoidal AUC
    (the Mann-Whitney statistic, ties counted 0.5)

    Args:
        cohort: Scores with both label classes present
        bootstrap_samples: When > 0, fill se and the 2.5/97.5 percentile CI,
            widened to include the point AUC when the resamples miss it
        seed: Root seed of the bootstrap substream
        workers: joblib thread count for the bootstrap

    Raises:
        UndefinedMetricError: A class is missing
    """
    thresholds, fpr, tpr = roc_points(cohort)
    area = float(auc(fpr, tpr))
    summary = RocSummary(thresholds=thresholds, fpr=fpr, tpr=tpr, auc=area,
                         ci_low=area, ci_high=area)
    if bootstrap_samples:
        se, low, high = bootstrap_auc(cohort, bootstrap_samples, seed, workers)
        summary.se = se
        # the reported interval always brackets the point estimate
        summary.ci_low = min(low, area)
        summary.ci_high = max(high, area)
        summary.bootstrap_samples = bootstrap_samples
    return summary


def _resample_aucs(labels: np.ndarray, scores: np.ndarray, seed: int, start: int, stop: int) -> List[float]:
    positives = np.flatnonzero(labels == 1)
    negatives = np.flatnonzero(labels == 0)
    values = []
    for b in range(start, stop):
        rng = make_rng(seed, "bootstrap", b)
        index = np.concatenate([
            rng.choice(positives, size=positives.size, replace=True),
            rng.choice(negatives, size=negatives.size, replace=True),
        ])
        values.append(float(roc_auc_score(labels[index], scores[index])))
    return values


def bootstrap_auc(cohort: ScoredCohort, samples: int = 1000, seed: int = 0, workers: int = 1):
    """
    Stratified bootstrap of the AUC: every resample draws positives and negatives
    separately with replacement, so both classes are always present

    Returns:
        (se, ci_low, ci_high) with se the sample standard deviation and the CI
        the 2.5/97.5 percentiles of the resampled AUCs
    """
    if samples < MIN_BOOTSTRAP:
        raise ConfigurationError(f"Bootstrap needs at least {MIN_BOOTSTRAP} resamples, got {samples}")
    cohort.require_both_classes("Bootstrap AUC")

    bounds = [(start, min(start + BOOTSTRAP_CHUNK, samples)) for start in range(0, samples, BOOTSTRAP_CHUNK)]
    chunks = Parallel(n_jobs=max(1, workers), prefer="threads")(
        delayed(_resample_aucs)(cohort.labels, cohort.scores, seed, start, stop) for start, stop in bounds
    )
    aucs = np.asarray([value for chunk in chunks for value in chunk])
    se = float(np.std(aucs, ddof=1))
    low, high = np.percentile(aucs, [2.5, 97.5])
    return se, float(low), float(high)


def write_roc_csv(summary: RocSummary, path) -> Path:
    """Plot-ready `threshold,fpr,tpr` table"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        summary.to_frame().to_csv(path, index=False, float_format="%.12g", lineterminator="\n")
    except OSError as e:
        raise OutputPathError(f"Cannot write ROC table {path}: {e}")
    return path

