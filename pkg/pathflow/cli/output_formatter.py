# -*- coding: utf-8 -*-
"""
Output Formatter
Formats run outcomes and report tables for terminal display
Color-coded, structured output
"""

from typing import Any, Dict, Optional, Sequence

from pathflow.harness.report import METRIC_FIELDS, ExperimentReport


class Colors:
    """ANSI color codes for terminal output"""
    GREEN = '\033[92m'
    RED = '\033[91m'
    YELLOW = '\033[93m'
    BLUE = '\033[94m'
    CYAN = '\033[96m'
    BOLD = '\033[1m'
    DIM = '\033[2m'
    RESET = '\033[0m'


class OutputFormatter:
    """
    Format command outcomes and metric report rows
    """

    def __init__(self, use_colors: bool = True):
        self.use_colors = use_colors

    def format_success(self, command: str, details: str = "", duration: Optional[float] = None) -> str:
        lines = [self._colorize(f"[OK] {command}", Colors.GREEN + Colors.BOLD)]
        if details:
            lines.append(f"  {details}")
        if duration is not None:
            lines.append(f"  {self._colorize(f'Duration: {duration:.2f}s', Colors.CYAN)}")
        return "\n".join(lines)

    def format_report_table(self, rows: Sequence[Dict[str, Any]], labels: Sequence[str]) -> str:
        """
        Fixed-width metrics table

        Args:
            rows: metrics rows (METRICS_COLUMNS order)
            labels: Row labels, e.g. the repeat index or 'mean'
        """
        header = f"{'run':<24}" + "".join(f"{name:>12}" for name in METRIC_FIELDS)
        lines = [self._colorize(header, Colors.BOLD), self._colorize("-" * len(header), Colors.DIM)]
        for label, row in zip(labels, rows):
            cells = "".join(f"{self._format_value(row.get(name)):>12}" for name in METRIC_FIELDS)
            lines.append(f"{label:<24}{cells}")
        return "\n".join(lines)

    def format_report(self, report: ExperimentReport) -> str:
        return self.format_report_table([report.metrics_row()], [report.stem])

    def format_gradcheck(self, block_errors: Dict[str, float], global_max: float, tolerance: float) -> str:
        lines = []
        for name, error in block_errors.items():
            color = Colors.GREEN if error <= tolerance else Colors.RED
            lines.append(f"  {name:<28}{self._colorize(f'{error:.3e}', color)}")
        verdict = "[OK]" if global_max <= tolerance else "[FAIL]"
        color = Colors.GREEN if global_max <= tolerance else Colors.RED
        lines.append(self._colorize(f"{verdict} max relative error {global_max:.3e} "
                                    f"(tolerance {tolerance:.0e})", color + Colors.BOLD))
        return "\n".join(lines)

    def format_info(self, message: str) -> str:
        """Format info message"""
        return self._colorize(f"[INFO] {message}", Colors.CYAN)

    def format_warning(self, message: str) -> str:
        """Format warning message"""
        return self._colorize(f"[WARN] {message}", Colors.YELLOW)

    def format_error_from_exception(self, exception: Exception) -> str:
        """Format exception as error message, tagged with its class"""
        return self._colorize(f"[ERROR] {type(exception).__name__}: {exception}", Colors.RED)

    @staticmethod
    def _format_value(value) -> str:
        if value is None:
            return "NA"
        if isinstance(value, float):
            return f"{value:.4f}"
        return str(value)

    def _colorize(self, text: str, color: str) -> str:
        """Apply color to text if colors enabled"""
        if self.use_colors:
            return f"{color}{text}{Colors.RESET}"
        return text
