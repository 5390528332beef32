"""
Short/long survivor classes from the training-split median overall survival
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from pathflow.core.exceptions import CutoffError
from pathflow.dataio.manifest import SlideRecord
from pathflow.harness.splits import SplitAssignment

SHORT = 1
LONG = 0


@dataclass
class SurvivalClasses:
    """
    cutoff: median train os_days; labels: slide_id -> 1 short / 0 long;
    excluded: censored slides with os_days below the cutoff
    """
    cutoff: float
    labels: Dict[str, int] = field(default_factory=dict)
    excluded: List[str] = field(default_factory=list)

    def label(self, slide_id: str) -> Optional[int]:
        return self.labels.get(slide_id)


def classify_survival(record: SlideRecord, cutoff: float) -> Optional[int]:
    """1 when death observed before the cutoff, 0 when followed past it, None when unknowable"""
    if record.os_days is None:
        return None
    if record.os_days >= cutoff:
        return LONG
    return SHORT if record.event == 1 else None


def survival_cutoff(train_records: Sequence[SlideRecord]) -> float:
    """
    Raises:
        CutoffError: No training slide with known survival, or no observed death
    """
    known = [r for r in train_records if r.os_days is not None]
    if not known:
        raise CutoffError("No training slide has a survival time")
    if not any(r.event == 1 for r in known):
        raise CutoffError("Every training slide is censored; the short/long cutoff is undefined",
                          {"train_slides": len(known)})
    return float(np.median([r.os_days for r in known]))


def derive_survival_classes(records: Sequence[SlideRecord], split: SplitAssignment) -> SurvivalClasses:
    """Cutoff from the train split, applied to every slide of the repeat"""
    cutoff = survival_cutoff(split.select(records, "train"))
    return apply_cutoff(records, cutoff)


def apply_cutoff(records: Sequence[SlideRecord], cutoff: float) -> SurvivalClasses:
    classes = SurvivalClasses(cutoff=cutoff)
    for record in records:
        label = classify_survival(record, cutoff)
        if label is None:
            classes.excluded.append(record.slide_id)
        else:
            classes.labels[record.slide_id] = label
    return classes
