"""
Sigmoid output with binary cross-entropy
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import expit

from pathflow.core.exceptions import NonFiniteError, ShapeError

THRESHOLD = 0.5


@dataclass
class BinaryBatch:
    logits: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64).reshape(-1)
        self.labels = np.asarray(self.labels, dtype=np.float64).reshape(-1)
        if self.logits.shape != self.labels.shape or self.logits.size == 0:
            raise ShapeError(f"Logits {self.logits.shape} and labels {self.labels.shape} must align")
        if not np.all(np.isfinite(self.logits)):
            raise NonFiniteError("Non-finite logits in binary batch")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise ShapeError("Binary labels must be 0 or 1")


def bce_loss(batch: BinaryBatch) -> Tuple[float, np.ndarray]:
    """
    Mean binary cross-entropy on logits

    log(1 + e^z) - y*z is evaluated as logaddexp(0, z) - y*z so extreme logits
    neither overflow nor lose the loss to log(0).

    Returns:
        (loss, d loss / d logits) with gradient (sigmoid(z) - y) / n
    """
    z, y = batch.logits, batch.labels
    n = z.size
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    return loss, (expit(z) - y) / n


def predict_prob(logits) -> np.ndarray:
    return expit(np.asarray(logits, dtype=np.float64))


def predict_label(logits) -> np.ndarray:
    return (predict_prob(logits) >= THRESHOLD).astype(np.int64)
