"""
Output heads: sigmoid/BCE for subtype classification, Cox partial likelihood for risk
"""

from pathflow.heads.binary import THRESHOLD, BinaryBatch, bce_loss, predict_label, predict_prob
from pathflow.heads.cox import (
    BreslowBaseline, SurvivalBatch, breslow_baseline, cox_loss, predict_survival_days,
)

__all__ = [
    'THRESHOLD', 'BinaryBatch', 'bce_loss', 'predict_label', 'predict_prob',
    'BreslowBaseline', 'SurvivalBatch', 'breslow_baseline', 'cox_loss', 'predict_survival_days',
]
