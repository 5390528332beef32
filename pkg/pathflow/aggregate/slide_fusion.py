"""
Slide-level fusion of patch predictions
Classification slides take the majority patch label; survival slides take the median patch risk
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from pathflow.core.exceptions import AggregationError

VOTE_THRESHOLD = 0.5


@dataclass
class PatchPredictions:
    """Per-patch outputs of one slide: probabilities (classification) or risks (survival)"""
    slide_id: str
    values: np.ndarray
    kind: str = "prob"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.values.size == 0:
            raise AggregationError("No patch predictions to aggregate", {"slide_id": self.slide_id})
        if not np.all(np.isfinite(self.values)):
            raise AggregationError("Non-finite patch predictions", {"slide_id": self.slide_id})
        if self.kind not in ("prob", "risk"):
            raise AggregationError(f"Unknown prediction kind {self.kind}", {"slide_id": self.slide_id})
        if self.kind == "prob" and np.any((self.values < 0) | (self.values > 1)):
            raise AggregationError("Patch probabilities must lie in [0, 1]", {"slide_id": self.slide_id})


def majority_vote(predictions: PatchPredictions) -> Tuple[int, float]:
    """
    Returns:
        (slide label, fraction of positive patches); an exact tie goes to
        label 1 iff the mean probability is >= 0.5
    """
    if predictions.kind != "prob":
        raise AggregationError("Majority vote needs patch probabilities",
                               {"slide_id": predictions.slide_id})
    probs = predictions.values
    positives = int(np.count_nonzero(probs >= VOTE_THRESHOLD))
    negatives = probs.size - positives
    if positives != negatives:
        label = int(positives > negatives)
    else:
        label = int(probs.mean() >= VOTE_THRESHOLD)
    return label, positives / probs.size


def median_risk(predictions: PatchPredictions) -> float:
    """Median patch risk; even counts average the central pair"""
    return float(np.median(predictions.values))
