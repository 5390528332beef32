"""
Experiment protocol: splits, survival classes, training, evaluation and report files
"""

from pathflow.harness.experiment_config import ExperimentConfig, GradeFilter, Task
from pathflow.harness.splits import SplitAssignment, select_task_records, stratified_split, task_label
from pathflow.harness.survival_classes import (
    LONG, SHORT, SurvivalClasses, apply_cutoff, classify_survival, derive_survival_classes,
    survival_cutoff,
)
from pathflow.harness.patch_pipeline import ChannelStats, extract_all, predict_slides
from pathflow.harness.report import (
    METRICS_COLUMNS, ExperimentReport, emit_report, emit_summary, find_reports,
    load_metrics_row, load_report, summarize_reports,
)
from pathflow.harness.evaluator import compute_report, evaluate, score_slide
from pathflow.harness.trainer import RepeatOutcome, Trainer, make_batches, train_task

__all__ = [
    'ExperimentConfig', 'GradeFilter', 'Task',
    'SplitAssignment', 'select_task_records', 'stratified_split', 'task_label',
    'LONG', 'SHORT', 'SurvivalClasses', 'apply_cutoff', 'classify_survival',
    'derive_survival_classes', 'survival_cutoff',
    'ChannelStats', 'extract_all', 'predict_slides',
    'METRICS_COLUMNS', 'ExperimentReport', 'emit_report', 'emit_summary', 'find_reports',
    'load_metrics_row', 'load_report', 'summarize_reports',
    'compute_report', 'evaluate', 'score_slide',
    'RepeatOutcome', 'Trainer', 'make_batches', 'train_task',
]
