"""
Pearson and Spearman correlation between predicted and true values
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import pearsonr, spearmanr

from pathflow.core.exceptions import UndefinedMetricError


@dataclass
class CorrelationResult:
    pearson: float
    spearman: float
    n: int


def correlations(pred, truth) -> CorrelationResult:
    """
    Product-moment and rank correlation (average ranks for ties)

    Raises:
        UndefinedMetricError: Fewer than 3 points or a constant vector
    """
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    if pred.size != truth.size:
        raise UndefinedMetricError(f"Lengths differ: {pred.size} vs {truth.size}")
    if pred.size < 3:
        raise UndefinedMetricError(f"Correlation needs at least 3 points, got {pred.size}")
    if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(truth))):
        raise UndefinedMetricError("Correlation inputs must be finite")
    if np.ptp(pred) == 0 or np.ptp(truth) == 0:
        raise UndefinedMetricError("Correlation undefined for a constant vector")

    pearson = float(pearsonr(pred, truth)[0])
    spearman = float(spearmanr(pred, truth)[0])
    return CorrelationResult(pearson=float(np.clip(pearson, -1.0, 1.0)),
                             spearman=float(np.clip(spearman, -1.0, 1.0)), n=int(pred.size))
