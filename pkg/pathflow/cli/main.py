# -*- coding: utf-8 -*-
"""
PathFlow command line
pathflow synth|split|train|eval|report|gradcheck

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric error,
1 anything else.
"""

import argparse
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from pathflow.cli.output_formatter import OutputFormatter
from pathflow.core.config import Config
from pathflow.core.exceptions import (
    ConfigurationError, DataError, GradCheckFailure, NumericError,
)
from pathflow.core.logger import RunLogger, get_logger
from pathflow.core.seeding import make_rng
from pathflow.dataio.manifest import load_manifest
from pathflow.dataio.synth import CorpusSpec, synth_corpus
from pathflow.harness.evaluator import evaluate
from pathflow.harness.experiment_config import ExperimentConfig
from pathflow.harness.report import emit_summary, find_reports, load_report, summarize_reports
from pathflow.harness.splits import select_task_records, stratified_split
from pathflow.harness.trainer import train_task
from pathflow.heads.binary import BinaryBatch, bce_loss
from pathflow.metrics.metrics_collector import MetricsCollector
from pathflow.nncore.gradcheck import grad_check
from pathflow.nncore.layer_spec import default_architecture
from pathflow.nncore.network import ResidualNetwork

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

GRADCHECK_BATCH = 8
GRADCHECK_SIZE = 16
GRADCHECK_TOLERANCE = 1e-4

# flag dest -> ExperimentConfig field
EXPERIMENT_FLAGS = {
    "task": "task",
    "grade": "grade_filter",
    "ratios": "ratios",
    "repeats": "repeats",
    "patches_per_slide": "patches_per_slide",
    "patch_size": "patch_size",
    "epochs": "epochs",
    "batch_size": "batch_size",
    "lr": "lr",
    "momentum": "momentum",
    "weight_decay": "weight_decay",
    "seed": "seed",
    "workers": "workers",
    "patch_cache": "patch_cache",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathflow",
        description="Residual-network pathology pipeline: glioma subtype and survival prediction",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or 'key = value' run file")
    common.add_argument("--out", default="runs", help="Output directory (default: runs)")
    common.add_argument("--no-color", action="store_true", help="Plain terminal output")

    experiment = argparse.ArgumentParser(add_help=False)
    experiment.add_argument("--task", choices=["idh", "codel", "survival_class", "survival_cox"])
    experiment.add_argument("--grade", choices=["all", "II", "III", "IV"])
    experiment.add_argument("--ratios", help="train,val,test fractions, e.g. 0.5,0.25,0.25")
    experiment.add_argument("--repeats", type=int)
    experiment.add_argument("--patches-per-slide", type=int)
    experiment.add_argument("--patch-size", type=int)
    experiment.add_argument("--epochs", type=int)
    experiment.add_argument("--batch-size", type=int)
    experiment.add_argument("--lr", type=float)
    experiment.add_argument("--momentum", type=float)
    experiment.add_argument("--weight-decay", type=float)
    experiment.add_argument("--seed", type=int)
    experiment.add_argument("--workers", type=int)
    experiment.add_argument("--patch-cache", action="store_true", default=None,
                            help="Keep extracted patches under <out>/cache")

    manifest = argparse.ArgumentParser(add_help=False)
    manifest.add_argument("--manifest", required=True, help="Slide manifest CSV")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common, experiment], help="Generate a synthetic corpus")
    sub.add_parser("split", parents=[common, experiment, manifest], help="Write split tables")
    sub.add_parser("train", parents=[common, experiment, manifest], help="Train and test every repeat")
    eval_parser = sub.add_parser("eval", parents=[common, experiment, manifest],
                                 help="Apply a saved model to a manifest")
    eval_parser.add_argument("--model", required=True, help="PFNN model file")
    sub.add_parser("report", parents=[common, experiment],
                   help="Summarize report files under --out")
    gradcheck = sub.add_parser("gradcheck", parents=[common, experiment],
                               help="Finite-difference check of the network gradients")
    gradcheck.add_argument("--epsilon", type=float, default=1e-5)
    gradcheck.add_argument("--tolerance", type=float, default=GRADCHECK_TOLERANCE)
    return parser


def experiment_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Explicitly given experiment flags, keyed by ExperimentConfig field"""
    return {field: getattr(args, dest) for dest, field in EXPERIMENT_FLAGS.items()
            if getattr(args, dest, None) is not None}


def load_experiment(args: argparse.Namespace) -> ExperimentConfig:
    """defaults < default_config.yaml < --config < flags"""
    config = Config()
    config.reload()
    if args.config:
        config.load_from_file(args.config)
    config.validate()
    return ExperimentConfig.from_config(config, experiment_overrides(args))


class PathflowCLI:
    """
    One subcommand per method; every run ends with a RunLogger audit line
    """

    def __init__(self, use_colors: bool = True):
        self.logger = get_logger(__name__)
        self.formatter = OutputFormatter(use_colors=use_colors)
        self.run_logger = RunLogger()
        self.collector = MetricsCollector()

    def run(self, args: argparse.Namespace) -> int:
        start = time.perf_counter()
        handler = getattr(self, f"cmd_{args.command}")
        details: Dict[str, Any] = {"out": args.out}
        try:
            details.update(handler(args) or {})
        except ConfigurationError as e:
            return self._fail(args.command, e, details, EXIT_CONFIG)
        except DataError as e:
            return self._fail(args.command, e, details, EXIT_DATA)
        except NumericError as e:
            return self._fail(args.command, e, details, EXIT_NUMERIC)
        except Exception as e:
            self.logger.exception(f"[{args.command}] unexpected failure")
            return self._fail(args.command, e, details, EXIT_OTHER)

        self.run_logger.log_run(args.command, details, success=True)
        print(self.formatter.format_success(args.command, _summary_line(details),
                                            time.perf_counter() - start))
        return EXIT_OK

    def _fail(self, command: str, error: Exception, details: Dict[str, Any], code: int) -> int:
        details = dict(details, error=type(error).__name__, exit_code=code)
        self.run_logger.log_run(command, details, success=False)
        print(self.formatter.format_error_from_exception(error), file=sys.stderr)
        return code

    # ------------------------------------------------------------------
    # Subcommands
    # ------------------------------------------------------------------

    def cmd_synth(self, args) -> Dict[str, Any]:
        cfg = load_experiment(args)
        spec = CorpusSpec.from_mapping(Config().get("synth", {}))
        corpus = synth_corpus(spec, cfg.seed, args.out)
        return {"slides": len(corpus.records), "manifest": str(corpus.manifest_path)}

    def cmd_split(self, args) -> Dict[str, Any]:
        cfg = load_experiment(args)
        records = select_task_records(load_manifest(args.manifest), cfg)
        out_dir = Path(args.out)
        written: List[str] = []
        for repeat in range(cfg.repeats):
            split = stratified_split(records, cfg, repeat)
            path = split.write_csv(records, out_dir / f"{cfg.tag}_{repeat}.split.csv")
            counts = {name: sum(per_class.values()) for name, per_class in split.counts().items()}
            print(self.formatter.format_info(f"repeat {repeat}: {counts}"))
            written.append(str(path))
        return {"task": cfg.task.value, "grade": cfg.grade_filter.value, "files": len(written)}

    def cmd_train(self, args) -> Dict[str, Any]:
        cfg = load_experiment(args)
        records = load_manifest(args.manifest)
        outcomes = train_task(cfg, records, Path(args.manifest).parent, args.out, self.collector)

        reports = [o.report for o in outcomes]
        print(self.formatter.format_report_table([r.metrics_row() for r in reports],
                                                 [r.stem for r in reports]))
        print(self.collector.get_report())
        return {"task": cfg.task.value, "grade": cfg.grade_filter.value, "repeats": len(outcomes)}

    def cmd_eval(self, args) -> Dict[str, Any]:
        cfg = load_experiment(args)
        records = load_manifest(args.manifest)
        report = evaluate(args.model, records, Path(args.manifest).parent, cfg, args.out, self.collector)
        print(self.formatter.format_report(report))
        print(self.collector.get_report())
        return {"model": args.model, "slides": len(report.predictions)}

    def cmd_report(self, args) -> Dict[str, Any]:
        paths = find_reports(args.out, args.task, args.grade)
        if not paths:
            raise DataError(f"No report files under {args.out}")

        groups: Dict[tuple, list] = {}
        for path in paths:
            report = load_report(path)
            groups.setdefault((report.task, report.grade_filter), []).append(report)

        for (task, grade), reports in sorted(groups.items()):
            repeats = sorted((r for r in reports if r.repeat.isdigit()), key=lambda r: int(r.repeat))
            others = [r for r in reports if not r.repeat.isdigit()]
            rows = [r.metrics_row() for r in repeats + others]
            labels = [r.stem for r in repeats + others]
            if repeats:
                summary = emit_summary(repeats, args.out)
                rows.append(summarize_reports(repeats))
                labels.append(f"{task}_{grade}_mean")
                self.logger.info(f"[REPORT] {task}_{grade}: summary in {summary}")
            else:
                print(self.formatter.format_warning(f"{task}_{grade}: no training repeats to average"))
            print(self.formatter.format_report_table(rows, labels))
        return {"reports": len(paths), "families": len(groups)}

    def cmd_gradcheck(self, args) -> Dict[str, Any]:
        cfg = load_experiment(args)
        specs = default_architecture(3, cfg.stem_channels, cfg.stage_widths,
                                     cfg.blocks_per_stage, cfg.hidden_units)
        net = ResidualNetwork.initialize(specs, cfg.seed, GRADCHECK_SIZE, 3)
        rng = make_rng(cfg.seed, "gradcheck", "batch")
        x = rng.standard_normal((GRADCHECK_BATCH, 3, GRADCHECK_SIZE, GRADCHECK_SIZE))
        labels = np.arange(GRADCHECK_BATCH) % 2

        report = grad_check(net, x, lambda outputs: bce_loss(BinaryBatch(outputs, labels)),
                            epsilon=args.epsilon, seed=cfg.seed, check_input=True)
        print(self.formatter.format_gradcheck(report.block_errors, report.global_max, args.tolerance))
        if not report.passed(args.tolerance):
            raise GradCheckFailure(
                f"Max relative error {report.global_max:.3e} exceeds {args.tolerance:.0e}",
                {"worst": max(report.block_errors, key=report.block_errors.get)})
        return {"blocks": len(report.block_errors), "max_error": report.global_max}


def _summary_line(details: Dict[str, Any]) -> str:
    return ", ".join(f"{k}={v}" for k, v in details.items())


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Console entry point"""
    args = build_parser().parse_args(argv)
    return PathflowCLI(use_colors=not args.no_color and sys.stdout.isatty()).run(args)


if __name__ == "__main__":
    sys.exit(main())
