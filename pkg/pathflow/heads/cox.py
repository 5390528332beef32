# -*- coding: utf-8 -*-
"""
pathflow/heads/cox.py
Cox partial-likelihood output layer (Breslow ties) and the Breslow baseline hazard.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np

from pathflow.core.exceptions import CoxLikelihoodError, NonFiniteError, ShapeError


@dataclass
class SurvivalBatch:
    """risks are log-hazard scores; times in days; events 1 = death observed"""
    risks: np.ndarray
    times: np.ndarray
    events: np.ndarray

    def __post_init__(self):
        self.risks = np.asarray(self.risks, dtype=np.float64).reshape(-1)
        self.times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        self.events = np.asarray(self.events, dtype=np.int64).reshape(-1)
        n = self.risks.size
        if n == 0 or self.times.size != n or self.events.size != n:
            raise ShapeError("Risks, times and events must be non-empty and aligned")
        if not np.all(np.isfinite(self.risks)):
            raise NonFiniteError("Non-finite risks in survival batch")
        if not np.all(np.isfinite(self.times)) or np.any(self.times <= 0):
            raise ShapeError("Survival times must be positive and finite")
        if not np.all((self.events == 0) | (self.events == 1)):
            raise ShapeError("Events must be 0 or 1")

    @property
    def event_count(self) -> int:
        return int(self.events.sum())


def _log_risk_sets(risks: np.ndarray, times: np.ndarray) -> np.ndarray:
    """log sum_{j: t_j >= t_i} exp(r_j) for every subject i"""
    order = np.argsort(-times, kind="stable")
    desc_times = times[order]
    cumulative = np.logaddexp.accumulate(risks[order])
    # tied times share the risk set ending at the last member of their group
    group_end = np.searchsorted(-desc_times, -desc_times, side="right") - 1
    out = np.empty_like(risks)
    out[order] = cumulative[group_end]
    return out


def cox_loss(batch: SurvivalBatch) -> Tuple[float, np.ndarray]:
    """
    Negative log partial likelihood normalized by the event count

    loss = -(1/E) sum_{i: d_i = 1} [ r_i - log sum_{j: t_j >= t_i} exp(r_j) ]

    Returns:
        (loss, d loss / d risks)

    Raises:
        CoxLikelihoodError: The batch holds no observed death
    """
    events_total = batch.event_count
    if events_total == 0:
        raise CoxLikelihoodError("Partial likelihood undefined without observed events",
                                 {"n": int(batch.risks.size)})

    r, t = batch.risks, batch.times
    delta = batch.events.astype(np.float64)
    log_risk = _log_risk_sets(r, t)
    loss = float(-np.sum(delta * (r - log_risk)) / events_total)

    # log sum_{i: d_i = 1, t_i <= t_k} exp(-log_risk_i), accumulated in ascending time
    order = np.argsort(t, kind="stable")
    asc_times = t[order]
    terms = np.where(delta[order] == 1, -log_risk[order], -np.inf)
    cumulative = np.logaddexp.accumulate(terms)
    group_end = np.searchsorted(asc_times, asc_times, side="right") - 1
    log_exposure = np.empty_like(r)
    log_exposure[order] = cumulative[group_end]

    grad = -(delta - np.exp(r + log_exposure)) / events_total
    return loss, grad


@dataclass
class BreslowBaseline:
    """Cumulative baseline hazard H0 at the distinct event times (ascending)"""
    times: np.ndarray
    cumulative_hazard: np.ndarray
    max_time: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "times": [float(v) for v in self.times],
            "cumulative_hazard": [float(v) for v in self.cumulative_hazard],
            "max_time": float(self.max_time),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BreslowBaseline":
        return cls(np.asarray(data["times"], dtype=np.float64),
                   np.asarray(data["cumulative_hazard"], dtype=np.float64),
                   float(data["max_time"]))


def breslow_baseline(risks, times, events) -> BreslowBaseline:
    """
    H0(t) = sum over event times u <= t of d(u) / sum_{j: t_j >= u} exp(r_j)

    Raises:
        CoxLikelihoodError: No observed events
    """
    batch = SurvivalBatch(risks, times, events)
    if batch.event_count == 0:
        raise CoxLikelihoodError("Baseline hazard undefined without observed events")

    log_risk = _log_risk_sets(batch.risks, batch.times)
    event_mask = batch.events == 1
    event_times, first, deaths = np.unique(batch.times[event_mask], return_index=True,
                                           return_counts=True)
    increments = deaths * np.exp(-log_risk[event_mask][first])
    return BreslowBaseline(event_times, np.cumsum(increments), float(batch.times.max()))


def predict_survival_days(risks, baseline: BreslowBaseline) -> np.ndarray:
    """
    Median survival time: first event time with S(t) = exp(-H0(t) e^r) <= 0.5,
    capped at the largest training time when the curve never reaches 0.5
    """
    risks = np.asarray(risks, dtype=np.float64)
    target = math.log(2.0) * np.exp(-risks)
    index = np.searchsorted(baseline.cumulative_hazard, target, side="left")
    capped = index >= baseline.times.size
    days = baseline.times[np.minimum(index, baseline.times.size - 1)]
    return np.where(capped, baseline.max_time, days)
