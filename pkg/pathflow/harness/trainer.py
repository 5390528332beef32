# -*- coding: utf-8 -*-
"""
pathflow/harness/trainer.py
Per-repeat training: split, standardize, SGD epochs with validation-based
epoch selection, a single test evaluation, model file and report emission.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from pathflow.core.exceptions import (
    DataError, NonFiniteError, TrainingDivergenceError, UndefinedMetricError,
)
from pathflow.core.logger import get_logger
from pathflow.core.seeding import make_rng
from pathflow.dataio.manifest import SlideRecord
from pathflow.dataio.patches import PatchSet
from pathflow.heads.binary import BinaryBatch, bce_loss
from pathflow.heads.cox import BreslowBaseline, SurvivalBatch, breslow_baseline, cox_loss
from pathflow.harness.evaluator import build_predictions, compute_report, slide_scores
from pathflow.harness.experiment_config import MIN_COX_BATCH, ExperimentConfig, Task
from pathflow.harness.patch_pipeline import ChannelStats, extract_all, predict_slides, stack_patches
from pathflow.harness.report import ExperimentReport, emit_report, emit_summary
from pathflow.harness.splits import SplitAssignment, select_task_records, stratified_split
from pathflow.harness.survival_classes import derive_survival_classes
from pathflow.metrics.classification import ScoredCohort, roc_auc
from pathflow.metrics.metrics_collector import MetricsCollector
from pathflow.metrics.survival import c_index
from pathflow.nncore.layer_spec import default_architecture
from pathflow.nncore.network import ResidualNetwork
from pathflow.nncore.optim import SGDOptimizer
from pathflow.nncore.serialization import save_model
from pathflow.nncore.tensor import Mode


MIN_BCE_BATCH = 2


@dataclass
class RepeatOutcome:
    report: ExperimentReport
    model_path: Path
    split: SplitAssignment


def make_batches(order: np.ndarray, batch_size: int, min_batch: int) -> List[np.ndarray]:
    """Consecutive batches of `order`; a trailing batch below min_batch joins the previous one"""
    batches = [order[i:i + batch_size] for i in range(0, order.size, batch_size)]
    if len(batches) > 1 and batches[-1].size < min_batch:
        tail = batches.pop()
        batches[-1] = np.concatenate([batches[-1], tail])
    return batches


def check_no_leakage(records: Sequence[SlideRecord], split: SplitAssignment):
    """Training and test patients must be disjoint"""
    patients = {s: {r.patient_id for r in split.select(records, s)} for s in ("train", "val", "test")}
    shared = (patients["train"] & patients["test"]) | (patients["train"] & patients["val"])
    if shared:
        raise DataError("Patients appear in both training and held-out splits",
                        {"patients": sorted(shared)[:10]})


class TaskData:
    """Slide ids, labels and survival fields of one repeat"""

    def __init__(self, records: Sequence[SlideRecord], split: SplitAssignment, cfg: ExperimentConfig):
        self.records = {r.slide_id: r for r in records}
        self.cutoff: Optional[float] = None
        self.excluded: List[str] = []
        if cfg.task.is_survival:
            classes = derive_survival_classes(records, split)
            self.cutoff = classes.cutoff
            self.excluded = classes.excluded
            self.truth = {sid: classes.label(sid) for sid in self.records}
        elif cfg.task is Task.IDH:
            self.truth = {sid: r.idh for sid, r in self.records.items()}
        else:
            self.truth = {sid: r.codel for sid, r in self.records.items()}

        usable = (lambda sid: True) if cfg.task is Task.SURVIVAL_COX else \
            (lambda sid: self.truth.get(sid) is not None)
        self.ids = {s: [sid for sid in split.ids(s) if usable(sid)] for s in ("train", "val", "test")}

    def subset(self, split: str) -> List[SlideRecord]:
        return [self.records[sid] for sid in self.ids[split]]


class Trainer:
    """
    Runs every repeat of one experiment family
    """

    def __init__(self, cfg: ExperimentConfig, records: Sequence[SlideRecord], base_dir,
                 out_dir, collector: Optional[MetricsCollector] = None):
        self.cfg = cfg
        self.records = select_task_records(records, cfg)
        self.base_dir = Path(base_dir)
        self.out_dir = Path(out_dir)
        self.collector = collector or MetricsCollector()
        self.logger = get_logger(__name__)
        self.specs = default_architecture(3, cfg.stem_channels, cfg.stage_widths,
                                          cfg.blocks_per_stage, cfg.hidden_units)
        self.patch_sets: Dict[str, PatchSet] = {}

    def run(self) -> List[RepeatOutcome]:
        self.logger.info(f"[TRAIN] {self.cfg.tag}: {len(self.records)} slides, {self.cfg.repeats} repeats")
        splits = [stratified_split(self.records, self.cfg, r) for r in range(self.cfg.repeats)]
        self.patch_sets = extract_all(self.records, self.base_dir, self.cfg,
                                      self.out_dir / "cache", self.collector)
        outcomes = [self.run_repeat(repeat, split) for repeat, split in enumerate(splits)]
        emit_summary([o.report for o in outcomes], self.out_dir)
        return outcomes

    # ------------------------------------------------------------------
    # One repeat
    # ------------------------------------------------------------------

    def run_repeat(self, repeat: int, split: SplitAssignment) -> RepeatOutcome:
        cfg = self.cfg
        stem = f"{cfg.tag}_{repeat}"
        check_no_leakage(self.records, split)
        split.write_csv(self.records, self.out_dir / f"{stem}.split.csv")

        data = TaskData(self.records, split, cfg)
        if data.excluded:
            self.logger.info(f"[SPLIT] {stem}: {len(data.excluded)} censored slides below the "
                             f"{data.cutoff:.1f}-day cutoff excluded from classification")

        patches = stack_patches(self.patch_sets, data.ids["train"])
        stats = ChannelStats.from_patches(patches)
        patches = stats.apply(patches)
        counts = [len(self.patch_sets[sid]) for sid in data.ids["train"]]
        net = ResidualNetwork.initialize(self.specs, cfg.seed, cfg.patch_size, 3, repeat)

        if cfg.task is Task.SURVIVAL_COX:
            times = np.repeat([data.records[s].os_days for s in data.ids["train"]], counts)
            events = np.repeat([data.records[s].event for s in data.ids["train"]], counts)
            loss_fn = self._cox_loss_fn(times, events)
        else:
            labels = np.repeat([data.truth[s] for s in data.ids["train"]], counts)
            loss_fn = lambda index, outputs: bce_loss(BinaryBatch(outputs, labels[index]))
            events = None

        best_params, best_epoch, best_metric, skipped = self._fit(net, patches, loss_fn, events,
                                                                  stats, data, repeat)
        net.params = best_params

        metadata = self._model_metadata(net, stats, data, repeat, best_epoch)
        model_path = save_model(net, self.out_dir / f"{stem}.model.pfnn", metadata)

        # test split: scored once, after selection
        outputs = predict_slides(net, stats, self.patch_sets, data.ids["test"], cfg, self.collector)
        baseline = BreslowBaseline.from_dict(metadata["baseline"]) if metadata["baseline"] else None
        table = build_predictions(data.subset("test"), slide_scores(outputs, cfg.task.head),
                                  data.truth, cfg.task, metadata.get("risk_threshold"), baseline)
        extras = {
            "selected_epoch": best_epoch,
            "val_metric": best_metric if np.isfinite(best_metric) else None,
            "cutoff": data.cutoff,
            "risk_threshold": metadata.get("risk_threshold"),
            "excluded_slides": len(data.excluded),
            "skipped_batches": skipped,
            "train_slides": len(data.ids["train"]),
            "val_slides": len(data.ids["val"]),
            "test_slides": len(data.ids["test"]),
        }
        report = compute_report(cfg.task, cfg.grade_filter.value, repeat, table, cfg, extras)
        emit_report(report, self.out_dir)
        self.logger.info(f"[TEST] {stem}: accuracy={report.accuracy} auc={report.auc} "
                         f"c_index={report.c_index}")
        return RepeatOutcome(report=report, model_path=model_path, split=split)

    def _cox_loss_fn(self, times: np.ndarray, events: np.ndarray) -> Callable:
        return lambda index, outputs: cox_loss(SurvivalBatch(outputs, times[index], events[index]))

    def _fit(self, net: ResidualNetwork, patches: np.ndarray, loss_fn, events, stats: ChannelStats,
             data: TaskData, repeat: int) -> Tuple[Any, int, float, int]:
        cfg = self.cfg
        optimizer = SGDOptimizer(net.params, cfg.lr, cfg.momentum, cfg.weight_decay)
        min_batch = MIN_COX_BATCH if cfg.task is Task.SURVIVAL_COX else MIN_BCE_BATCH
        best = (net.params.copy(), -1, -np.inf)
        skipped = 0

        for epoch in range(cfg.epochs):
            with self.collector.timed("epoch"):
                order = make_rng(cfg.seed, "shuffle", repeat, epoch).permutation(patches.shape[0])
                losses = []
                for batch, index in enumerate(make_batches(order, cfg.batch_size, min_batch)):
                    if events is not None and not np.any(events[index] == 1):
                        skipped += 1
                        self.collector.increment("skipped_batches")
                        continue
                    with self.collector.timed("batch"):
                        losses.append(self._step(net, optimizer, patches[index], index, loss_fn,
                                                 epoch, batch))
                    self.collector.increment("batches")

            metric = self._validation_metric(net, stats, data)
            self.collector.increment("epochs")
            self.logger.info(f"[EPOCH] repeat {repeat} epoch {epoch}: "
                             f"loss={np.mean(losses) if losses else float('nan'):.6f} val={metric:.4f}")
            if metric > best[2]:
                best = (net.params.copy(), epoch, metric)

        if best[1] < 0:
            # validation never defined: ship the last epoch, never the initial weights
            self.logger.warning(f"[SELECT] repeat {repeat}: validation metric undefined for every epoch, "
                                f"keeping the last epoch {cfg.epochs - 1}")
            self.collector.increment("undefined_validation")
            best = (net.params.copy(), cfg.epochs - 1, -np.inf)

        self.logger.info(f"[SELECT] repeat {repeat}: epoch {best[1]} (validation {best[2]:.4f})")
        return best[0], best[1], best[2], skipped

    def _step(self, net: ResidualNetwork, optimizer: SGDOptimizer, x: np.ndarray, index: np.ndarray,
              loss_fn, epoch: int, batch: int) -> float:
        try:
            result = net.forward(x, Mode.TRAIN, update_running_stats=True)
            loss, doutputs = loss_fn(index, result.outputs)
            if not np.isfinite(loss):
                raise NonFiniteError(f"Non-finite loss {loss}")
            grads, _ = net.backward(doutputs, result)
            optimizer.step(grads)
        except NonFiniteError as e:
            raise TrainingDivergenceError(f"Training diverged: {e.message}", epoch=epoch, batch=batch)
        return float(loss)

    def _validation_metric(self, net: ResidualNetwork, stats: ChannelStats, data: TaskData) -> float:
        """Validation AUC (classification heads) or c-index (Cox head); -inf when undefined"""
        cfg = self.cfg
        ids = data.ids["val"]
        if not ids:
            return -np.inf
        scores = slide_scores(predict_slides(net, stats, self.patch_sets, ids, cfg, self.collector),
                              cfg.task.head)
        values = np.array([scores[sid]["score"] for sid in ids])
        try:
            if cfg.task is Task.SURVIVAL_COX:
                records = data.subset("val")
                return c_index(values, [r.os_days for r in records], [r.event for r in records])
            return roc_auc(ScoredCohort(values, labels=[data.truth[sid] for sid in ids])).auc
        except UndefinedMetricError:
            return -np.inf

    def _model_metadata(self, net: ResidualNetwork, stats: ChannelStats, data: TaskData,
                        repeat: int, epoch: int) -> Dict[str, Any]:
        cfg = self.cfg
        metadata: Dict[str, Any] = {
            "task": cfg.task.value,
            "head": cfg.task.head,
            "grade_filter": cfg.grade_filter.value,
            "repeat": repeat,
            "selected_epoch": epoch,
            "standardization": stats.to_dict(),
            "cutoff": data.cutoff,
            "risk_threshold": None,
            "baseline": None,
            "config": cfg.to_dict(),
        }
        if cfg.task is Task.SURVIVAL_COX:
            ids = data.ids["train"]
            scores = slide_scores(predict_slides(net, stats, self.patch_sets, ids, cfg, self.collector), "cox")
            risks = np.array([scores[sid]["score"] for sid in ids])
            records = data.subset("train")
            metadata["risk_threshold"] = float(np.median(risks))
            metadata["baseline"] = breslow_baseline(
                risks, [r.os_days for r in records], [r.event for r in records]).to_dict()
        return metadata


def train_task(cfg: ExperimentConfig, records: Sequence[SlideRecord], base_dir, out_dir,
               collector: Optional[MetricsCollector] = None) -> List[RepeatOutcome]:
    """
    Train and test one model per repeat

    Raises:
        InsufficientDataError: A class too small for the split protocol
        CutoffError: Survival tasks with an all-censored training split
        TrainingDivergenceError: Non-finite loss or gradient (epoch and batch in details)
    """
    return Trainer(cfg, records, base_dir, out_dir, collector).run()
