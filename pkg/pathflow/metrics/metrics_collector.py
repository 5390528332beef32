# -*- coding: utf-8 -*-
"""
pathflow/metrics/metrics_collector.py
Run telemetry: counters, running-average latencies and peak resident memory.
In-memory only; never part of a report file.
"""

import time
from contextlib import contextmanager
from typing import Dict

import psutil


class MetricsCollector:
    """
    Collects pipeline counters and latencies for one CLI run.
    Latencies are running averages, O(1) space per tracker.
    """

    def __init__(self):
        self._process = psutil.Process()
        self._reset()

    def _reset(self):
        self.counters: Dict[str, int] = {
            "slides_extracted": 0,
            "patches_extracted": 0,
            "replacement_slides": 0,
            "cache_hits": 0,
            "epochs": 0,
            "batches": 0,
            "skipped_batches": 0,
            "undefined_validation": 0,
            "inference_chunks": 0,
        }

        # (avg, count) per tracker
        self.latencies: Dict[str, Dict[str, float]] = {
            "batch": {"avg": 0.0, "count": 0.0},
            "epoch": {"avg": 0.0, "count": 0.0},
            "inference": {"avg": 0.0, "count": 0.0},
        }
        self.peak_rss_mb = 0.0

    def increment(self, counter_name: str, amount: int = 1):
        """Increment a known counter"""
        if counter_name in self.counters:
            self.counters[counter_name] += amount

    def record_latency(self, metric_name: str, duration_ms: float):
        """
        Update running average latency.
        Formula: new_avg = (old_avg * count + new_value) / (count + 1)
        """
        if metric_name not in self.latencies:
            return

        tracker = self.latencies[metric_name]
        count = tracker["count"]
        tracker["avg"] = (tracker["avg"] * count + duration_ms) / (count + 1)
        tracker["count"] = count + 1

    @contextmanager
    def timed(self, metric_name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.record_latency(metric_name, (time.perf_counter() - start) * 1000.0)
            self.sample_memory()

    def sample_memory(self) -> float:
        rss_mb = self._process.memory_info().rss / (1024 * 1024)
        self.peak_rss_mb = max(self.peak_rss_mb, rss_mb)
        return rss_mb

    def get_report(self) -> str:
        """Format metrics for CLI display"""
        report = ["PathFlow Run Metrics:", "-" * 30]
        report.append(f"Slides Extracted:     {self.counters['slides_extracted']}")
        report.append(f"Patches Extracted:    {self.counters['patches_extracted']}")
        report.append(f"Replacement Slides:   {self.counters['replacement_slides']}")
        report.append(f"Cache Hits:           {self.counters['cache_hits']}")
        report.append(f"Epochs:               {self.counters['epochs']}")
        report.append(f"Batches:              {self.counters['batches']}")
        report.append(f"Skipped Batches:      {self.counters['skipped_batches']}")
        report.append(f"Inference Chunks:     {self.counters['inference_chunks']}")
        report.append("-" * 30)
        report.append(f"Avg Batch Latency:    {self.latencies['batch']['avg']:.2f} ms")
        report.append(f"Avg Epoch Latency:    {self.latencies['epoch']['avg']:.2f} ms")
        report.append(f"Avg Inference Chunk:  {self.latencies['inference']['avg']:.2f} ms")
        report.append(f"Peak RSS:             {self.peak_rss_mb:.1f} MB")
        return "\n".join(report)

    def reset(self):
        """Reset all metrics"""
        self._reset()
