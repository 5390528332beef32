# -*- coding: utf-8 -*-
"""
pathflow/harness/evaluator.py
Slide scoring, report assembly and stand-alone evaluation of a saved model.
"""

from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np
import pandas as pd

from pathflow.aggregate.slide_fusion import PatchPredictions, majority_vote, median_risk
from pathflow.core.exceptions import CompatibilityError, ModelFileError, UndefinedMetricError
from pathflow.core.logger import get_logger
from pathflow.core.seeding import derive_seed
from pathflow.dataio.manifest import Grade, SlideRecord, Subtype
from pathflow.heads.binary import predict_prob
from pathflow.heads.cox import BreslowBaseline, predict_survival_days
from pathflow.harness.experiment_config import ExperimentConfig, Task
from pathflow.harness.patch_pipeline import ChannelStats, extract_all, predict_slides
from pathflow.harness.report import ExperimentReport, emit_report
from pathflow.harness.splits import select_task_records, task_label
from pathflow.harness.survival_classes import apply_cutoff
from pathflow.metrics.classification import ScoredCohort, confusion_counts, confusion_stats, roc_auc
from pathflow.metrics.correlation import correlations
from pathflow.metrics.metrics_collector import MetricsCollector
from pathflow.metrics.survival import c_index
from pathflow.nncore.serialization import load_model

logger = get_logger(__name__)


def score_slide(slide_id: str, outputs: np.ndarray, head: str) -> Dict[str, Any]:
    """
    Fuse the patch outputs of one slide

    Binary heads vote on patch probabilities (score = positive patch fraction);
    the Cox head takes the median patch risk (score = risk).
    """
    if head == "cox":
        return {"score": median_risk(PatchPredictions(slide_id, outputs, kind="risk"))}
    probs = predict_prob(outputs)
    label, fraction = majority_vote(PatchPredictions(slide_id, probs))
    return {"score": fraction, "predicted": label, "positive_fraction": fraction,
            "mean_prob": float(probs.mean())}


def slide_scores(patch_outputs: Dict[str, np.ndarray], head: str) -> Dict[str, Dict[str, Any]]:
    return {sid: score_slide(sid, outputs, head) for sid, outputs in patch_outputs.items()}


def truth_labels(records: Sequence[SlideRecord], task: Task,
                 cutoff: Optional[float]) -> Dict[str, Optional[int]]:
    """Binary truth per slide: molecular label, or short(1)/long(0) for survival tasks"""
    if task.is_survival:
        classes = apply_cutoff(records, cutoff)
        return {r.slide_id: classes.label(r.slide_id) for r in records}
    return {r.slide_id: task_label(r, task) for r in records}


def build_predictions(records: Sequence[SlideRecord], scores: Dict[str, Dict[str, Any]],
                      truth: Dict[str, Optional[int]], task: Task,
                      risk_threshold: Optional[float] = None,
                      baseline: Optional[BreslowBaseline] = None) -> pd.DataFrame:
    """Per-slide predictions table, in slide_id order"""
    rows = []
    for record in sorted(records, key=lambda r: r.slide_id):
        if record.slide_id not in scores:
            continue
        entry = scores[record.slide_id]
        row = {
            "slide_id": record.slide_id,
            "patient_id": record.patient_id,
            "grade": record.grade.value,
            "subtype": record.subtype.value if record.subtype is not None else None,
            "score": entry["score"],
            "truth": truth.get(record.slide_id),
            "predicted": entry.get("predicted"),
            "os_days": record.os_days,
            "event": record.event,
        }
        if task is Task.SURVIVAL_COX:
            row["predicted"] = int(entry["score"] >= risk_threshold)
            if baseline is not None:
                row["predicted_days"] = float(predict_survival_days(entry["score"], baseline))
        else:
            row["positive_fraction"] = entry["positive_fraction"]
            row["mean_prob"] = entry["mean_prob"]
        rows.append(row)
    table = pd.DataFrame(rows)
    for column in ("truth", "predicted", "event"):
        if column in table.columns:
            table[column] = table[column].astype("Int64")
    return table


def _optional(fn, what: str, stem: str):
    try:
        return fn()
    except UndefinedMetricError as e:
        logger.warning(f"[EVAL] {stem}: {what} undefined ({e.message})")
        return None


def _quiet(fn):
    try:
        return fn()
    except UndefinedMetricError:
        return None


def subtype_summary(predictions: pd.DataFrame) -> Dict[str, Dict[str, Any]]:
    """
    Survival statistics within each molecular subtype of a predictions table

    Per subtype: slide and death counts, median score, c-index, Spearman of
    score against -os_days over deaths, AUC against the short/long truth and
    the median score per grade. Statistics a subtype cannot support are None.
    """
    summary: Dict[str, Dict[str, Any]] = {}
    for subtype in Subtype:
        group = predictions[predictions["subtype"] == subtype.value]
        if group.empty:
            continue
        risks = group["score"].to_numpy(dtype=np.float64)
        times = group["os_days"].to_numpy(dtype=np.float64)
        events = group["event"].to_numpy(dtype=np.int64)
        observed = events == 1
        labeled = group[group["truth"].notna()]
        corr = _quiet(lambda: correlations(risks[observed], -times[observed]))
        roc = _quiet(lambda: roc_auc(ScoredCohort(labeled["score"].to_numpy(dtype=np.float64),
                                                  labels=labeled["truth"].to_numpy(dtype=np.int64))))
        summary[subtype.value] = {
            "slides": int(len(group)),
            "deaths": int(observed.sum()),
            "median_risk": float(np.median(risks)),
            "c_index": _quiet(lambda: c_index(risks, times, events)),
            "spearman": corr.spearman if corr is not None else None,
            "auc": roc.auc if roc is not None else None,
            "median_risk_by_grade": {
                grade.value: float(np.median(group.loc[group["grade"] == grade.value, "score"]))
                for grade in Grade if (group["grade"] == grade.value).any()
            },
        }
    return summary


def compute_report(task: Task, grade_filter: str, repeat, predictions: pd.DataFrame,
                   cfg: ExperimentConfig, extras: Optional[Dict[str, Any]] = None) -> ExperimentReport:
    """
    Slide-level statistics of a predictions table

    Classification statistics use slides with a defined truth; c-index,
    correlations (risk vs -os_days, deaths only) and the per-subtype summary
    apply to survival tasks.
    """
    report = ExperimentReport(task=task.value, grade_filter=grade_filter, repeat=str(repeat),
                              predictions=predictions, extras=dict(extras or {}))
    if predictions.empty:
        logger.warning(f"[EVAL] {report.stem}: no slides to evaluate")
        return report

    labeled = predictions[predictions["truth"].notna()]
    truth = labeled["truth"].to_numpy(dtype=np.int64)
    predicted = labeled["predicted"].to_numpy(dtype=np.int64)
    scores = labeled["score"].to_numpy(dtype=np.float64)

    report.confusion = confusion_counts(predicted, truth).to_dict()
    for grade in Grade:
        subset = labeled[labeled["grade"] == grade.value]
        report.per_grade[grade.value] = confusion_counts(
            subset["predicted"].to_numpy(dtype=np.int64), subset["truth"].to_numpy(dtype=np.int64)
        ).to_dict()

    stats = _optional(lambda: confusion_stats(predicted, truth), "confusion statistics", report.stem)
    if stats is not None:
        report.accuracy = 100.0 * stats.accuracy
        report.sensitivity = 100.0 * stats.sensitivity
        report.specificity = 100.0 * stats.specificity

    roc = _optional(
        lambda: roc_auc(ScoredCohort(scores, labels=truth), cfg.bootstrap_samples,
                        derive_seed(cfg.seed, "report", repeat), cfg.workers),
        "ROC", report.stem)
    if roc is not None:
        report.auc, report.auc_se = roc.auc, roc.se
        report.ci_low, report.ci_high = roc.ci_low, roc.ci_high
        report.roc_points = [[float(t), float(f), float(p)]
                             for t, f, p in zip(roc.thresholds, roc.fpr, roc.tpr)]

    if task.is_survival:
        risks = predictions["score"].to_numpy(dtype=np.float64)
        times = predictions["os_days"].to_numpy(dtype=np.float64)
        events = predictions["event"].to_numpy(dtype=np.int64)
        report.c_index = _optional(lambda: c_index(risks, times, events), "c-index", report.stem)
        observed = events == 1
        corr = _optional(lambda: correlations(risks[observed], -times[observed]),
                         "correlation", report.stem)
        if corr is not None:
            report.pearson, report.spearman = corr.pearson, corr.spearman
        if "subtype" in predictions.columns:
            report.per_subtype = subtype_summary(predictions)

    return report


def evaluate(model_path, records: Sequence[SlideRecord], base_dir, cfg: ExperimentConfig,
             out_dir=None, collector: Optional[MetricsCollector] = None) -> ExperimentReport:
    """
    Apply a saved model to the slides passing cfg's task and grade filter

    Never updates parameters or batch-norm running statistics.

    Raises:
        ModelFileError: Unreadable model or missing header fields
        CompatibilityError: The model's head does not fit cfg.task
    """
    net, meta = load_model(model_path)
    head = meta.get("head")
    if head != cfg.task.head:
        raise CompatibilityError(
            f"Model head '{head}' cannot serve task '{cfg.task.value}' (needs '{cfg.task.head}')",
            {"model": str(model_path), "model_task": meta.get("task")})
    if meta.get("task") != cfg.task.value:
        logger.warning(f"[EVAL] model trained for {meta.get('task')}, evaluating as {cfg.task.value}")
    if "standardization" not in meta:
        raise ModelFileError("Model header lacks standardization statistics")
    if cfg.task.is_survival and meta.get("cutoff") is None:
        raise CompatibilityError("Model header lacks the short/long survival cutoff")

    if net.input_size != cfg.patch_size:
        cfg = cfg.with_overrides(patch_size=net.input_size)
    stats = ChannelStats.from_dict(meta["standardization"])
    baseline = BreslowBaseline.from_dict(meta["baseline"]) if meta.get("baseline") else None

    selected = select_task_records(records, cfg)
    patch_sets = extract_all(selected, base_dir, cfg,
                             Path(out_dir) / "cache" if out_dir is not None else None, collector)
    ids = [r.slide_id for r in sorted(selected, key=lambda r: r.slide_id)]
    outputs = predict_slides(net, stats, patch_sets, ids, cfg, collector)
    scores = slide_scores(outputs, head)

    truth = truth_labels(selected, cfg.task, meta.get("cutoff"))
    table = build_predictions(selected, scores, truth, cfg.task,
                              meta.get("risk_threshold"), baseline)
    report = compute_report(cfg.task, cfg.grade_filter.value, "eval", table, cfg,
                            {"model": str(model_path), "cutoff": meta.get("cutoff")})
    logger.info(f"[EVAL] {report.stem}: {len(table)} slides, auc={report.auc}, c_index={report.c_index}")
    if out_dir is not None:
        emit_report(report, out_dir)
    return report
