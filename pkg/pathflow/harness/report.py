# -*- coding: utf-8 -*-
"""
pathflow/harness/report.py
Experiment reports and their files under the output directory.

Every file is named <task>_<grade>_<repeat>.<kind>.<ext>:
  report.json      full report with the per-slide predictions table
  metrics.csv      one metrics row
  roc.csv          threshold,fpr,tpr
  predictions.csv  per-slide table
  scatter.csv      slide_id,predicted,true (survival tasks, uncensored slides)
  riskgrade.csv    slide_id,grade,subtype,risk (survival tasks)
  subtype.csv      subtype,slides,deaths,median_risk,c_index,spearman,auc (survival tasks)
  survtime.csv     slide_id,predicted_days,true_days,event (Cox task)
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from pathflow.core.exceptions import DataError, OutputPathError
from pathflow.core.logger import get_logger

logger = get_logger(__name__)

METRICS_COLUMNS = [
    "task", "grade", "accuracy", "sensitivity", "specificity",
    "auc", "auc_se", "ci_low", "ci_high", "c_index", "pearson", "spearman",
]
METRIC_FIELDS = METRICS_COLUMNS[2:]
NA = "NA"
FLOAT_FORMAT = "%.12g"
SUBTYPE_COLUMNS = ["subtype", "slides", "deaths", "median_risk", "c_index", "spearman", "auc"]


def _clean(value):
    if value is None:
        return None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if math.isnan(value) else value
    return value


@dataclass
class ExperimentReport:
    """
    Slide-level results of one repeat (or one evaluate call).
    accuracy/sensitivity/specificity are percentages; metrics that are
    undefined for the task or cohort are None.
    """
    task: str
    grade_filter: str
    repeat: str
    predictions: pd.DataFrame
    accuracy: Optional[float] = None
    sensitivity: Optional[float] = None
    specificity: Optional[float] = None
    auc: Optional[float] = None
    auc_se: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    c_index: Optional[float] = None
    pearson: Optional[float] = None
    spearman: Optional[float] = None
    confusion: Optional[Dict[str, int]] = None
    per_grade: Dict[str, Dict[str, int]] = field(default_factory=dict)
    per_subtype: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    roc_points: List[List[float]] = field(default_factory=list)
    extras: Dict[str, Any] = field(default_factory=dict)

    @property
    def stem(self) -> str:
        return f"{self.task}_{self.grade_filter}_{self.repeat}"

    def metrics_row(self) -> Dict[str, Any]:
        row = {"task": self.task, "grade": self.grade_filter}
        row.update({name: _clean(getattr(self, name)) for name in METRIC_FIELDS})
        return row

    def to_dict(self) -> Dict[str, Any]:
        predictions = self.predictions.astype(object).where(self.predictions.notna(), None)
        return {
            "task": self.task,
            "grade_filter": self.grade_filter,
            "repeat": self.repeat,
            "metrics": {name: _clean(getattr(self, name)) for name in METRIC_FIELDS},
            "confusion": self.confusion,
            "per_grade": self.per_grade,
            "per_subtype": self.per_subtype,
            "roc_points": self.roc_points,
            "extras": {k: _clean(v) for k, v in self.extras.items()},
            "predictions": [{k: _clean(v) for k, v in row.items()}
                            for row in predictions.to_dict(orient="records")],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentReport":
        return cls(
            task=data["task"],
            grade_filter=data["grade_filter"],
            repeat=str(data["repeat"]),
            predictions=pd.DataFrame(data.get("predictions", [])),
            confusion=data.get("confusion"),
            per_grade=data.get("per_grade", {}),
            per_subtype=data.get("per_subtype", {}),
            roc_points=data.get("roc_points", []),
            extras=data.get("extras", {}),
            **{name: data.get("metrics", {}).get(name) for name in METRIC_FIELDS},
        )


def _write(path: Path, writer) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        writer(path)
    except OSError as e:
        raise OutputPathError(f"Cannot write {path}: {e}")
    return path


def _csv(frame: pd.DataFrame, path: Path) -> Path:
    return _write(path, lambda p: frame.to_csv(p, index=False, na_rep=NA,
                                               float_format=FLOAT_FORMAT, lineterminator="\n"))


def write_metrics_csv(rows: Sequence[Dict[str, Any]], path) -> Path:
    return _csv(pd.DataFrame(list(rows), columns=METRICS_COLUMNS), Path(path))


def emit_report(report: ExperimentReport, out_dir) -> List[Path]:
    """
    Write every file of one report

    Raises:
        OutputPathError: Output directory not writable
    """
    out_dir = Path(out_dir)
    stem = report.stem
    written = [
        _write(out_dir / f"{stem}.report.json",
               lambda p: p.write_text(json.dumps(report.to_dict(), indent=2), encoding="utf-8")),
        write_metrics_csv([report.metrics_row()], out_dir / f"{stem}.metrics.csv"),
        _csv(report.predictions, out_dir / f"{stem}.predictions.csv"),
    ]
    if report.roc_points:
        roc = pd.DataFrame(report.roc_points, columns=["threshold", "fpr", "tpr"])
        written.append(_csv(roc, out_dir / f"{stem}.roc.csv"))

    table = report.predictions
    if report.task.startswith("survival") and not table.empty:
        observed = table[table["event"] == 1]
        scatter = pd.DataFrame({"slide_id": observed["slide_id"], "predicted": observed["score"],
                                "true": observed["os_days"]})
        written.append(_csv(scatter, out_dir / f"{stem}.scatter.csv"))
        riskgrade = pd.DataFrame({"slide_id": table["slide_id"], "grade": table["grade"],
                                  "subtype": table.get("subtype"), "risk": table["score"]})
        written.append(_csv(riskgrade, out_dir / f"{stem}.riskgrade.csv"))
        if report.per_subtype:
            rows = [dict(subtype=name, **{k: _clean(entry.get(k)) for k in SUBTYPE_COLUMNS[1:]})
                    for name, entry in report.per_subtype.items()]
            written.append(_csv(pd.DataFrame(rows, columns=SUBTYPE_COLUMNS), out_dir / f"{stem}.subtype.csv"))
        if "predicted_days" in table.columns:
            survtime = pd.DataFrame({"slide_id": table["slide_id"],
                                     "predicted_days": table["predicted_days"],
                                     "true_days": table["os_days"], "event": table["event"]})
            written.append(_csv(survtime, out_dir / f"{stem}.survtime.csv"))

    logger.info(f"[REPORT] {stem}: {len(written)} files in {out_dir}")
    return written


def summarize_reports(reports: Sequence[ExperimentReport]) -> Dict[str, Any]:
    """Mean of every defined metric across repeats (NA when undefined everywhere)"""
    first = reports[0]
    row: Dict[str, Any] = {"task": first.task, "grade": first.grade_filter}
    for name in METRIC_FIELDS:
        values = [getattr(r, name) for r in reports if getattr(r, name) is not None]
        row[name] = float(np.mean(values)) if values else None
    return row


def emit_summary(reports: Sequence[ExperimentReport], out_dir) -> Path:
    """Per-repeat rows followed by the mean row in <task>_<grade>_mean.metrics.csv"""
    if not reports:
        raise DataError("No reports to summarize")
    rows = [r.metrics_row() for r in reports] + [summarize_reports(reports)]
    path = Path(out_dir) / f"{reports[0].task}_{reports[0].grade_filter}_mean.metrics.csv"
    return write_metrics_csv(rows, path)


def load_metrics_row(path) -> Dict[str, Any]:
    """First row of a metrics CSV with NA read back as None"""
    try:
        frame = pd.read_csv(path, na_values=[NA], keep_default_na=False)
    except (OSError, pd.errors.ParserError) as e:
        raise DataError(f"Cannot read metrics table {path}: {e}")
    if list(frame.columns) != METRICS_COLUMNS or frame.empty:
        raise DataError(f"{path} is not a metrics table")
    row = frame.iloc[0].to_dict()
    return {k: (_clean(v) if k in METRIC_FIELDS else v) for k, v in row.items()}


def load_report(path) -> ExperimentReport:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise DataError(f"Cannot read report {path}: {e}")
    return ExperimentReport.from_dict(data)


def find_reports(out_dir, task: Optional[str] = None, grade: Optional[str] = None) -> List[Path]:
    pattern = f"{task or '*'}_{grade or '*'}_*.report.json"
    return sorted(Path(out_dir).glob(pattern))
