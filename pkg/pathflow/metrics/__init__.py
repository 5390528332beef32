"""
Evaluation statistics and run telemetry
"""

from pathflow.metrics.classification import (
    ConfusionStats, RocSummary, ScoredCohort, bootstrap_auc, confusion_counts,
    confusion_stats, roc_auc, roc_points, write_roc_csv,
)
from pathflow.metrics.survival import c_index
from pathflow.metrics.correlation import CorrelationResult, correlations
from pathflow.metrics.metrics_collector import MetricsCollector

__all__ = [
    'ConfusionStats', 'RocSummary', 'ScoredCohort', 'bootstrap_auc', 'confusion_counts',
    'confusion_stats', 'roc_auc', 'roc_points', 'write_roc_csv',
    'c_index', 'CorrelationResult', 'correlations', 'MetricsCollector',
]
