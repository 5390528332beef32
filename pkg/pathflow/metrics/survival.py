"""
Harrell's concordance index
"""

import numpy as np

from pathflow.core.exceptions import UndefinedMetricError


def c_index(risks, times, events) -> float:
    """
    Pair (i, j) is comparable iff t_i < t_j and subject i died (tied times are
    not comparable). It is concordant when r_i > r_j; equal risks count 0.5.

    Raises:
        UndefinedMetricError: No comparable pair
    """
    risks = np.asarray(risks, dtype=np.float64).reshape(-1)
    times = np.asarray(times, dtype=np.float64).reshape(-1)
    events = np.asarray(events, dtype=np.int64).reshape(-1)
    if not (risks.size == times.size == events.size):
        raise UndefinedMetricError("Risks, times and events must align")

    comparable = (times[:, None] < times[None, :]) & (events[:, None] == 1)
    pairs = int(comparable.sum())
    if pairs == 0:
        raise UndefinedMetricError("c-index undefined: no comparable pairs", {"n": int(risks.size)})

    concordant = np.sum(comparable & (risks[:, None] > risks[None, :]))
    tied = np.sum(comparable & (risks[:, None] == risks[None, :]))
    return float((concordant + 0.5 * tied) / pairs)
