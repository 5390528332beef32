# -*- coding: utf-8 -*-
"""
pathflow/dataio/manifest.py
Slide manifest schema and CSV contract.

Header (exact): slide_id,patient_id,image_path,idh,codel,grade,os_days,event,sex,age
Unknown values are the literal "NA". Row numbers in errors are 1-based file
lines, so the first data row is row 2.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from pathflow.core.exceptions import (
    ManifestError,
    ManifestParseError,
    OutputPathError,
    TaxonomyError,
)
from pathflow.core.logger import get_logger

logger = get_logger(__name__)

MANIFEST_COLUMNS = [
    "slide_id", "patient_id", "image_path", "idh", "codel",
    "grade", "os_days", "event", "sex", "age",
]
NA = "NA"


class Grade(Enum):
    II = "II"
    III = "III"
    IV = "IV"


class Sex(Enum):
    MALE = "M"
    FEMALE = "F"
    UNKNOWN = NA


class Subtype(Enum):
    """Molecular subtype from IDH status and 1p/19q codeletion"""
    IDH_WILDTYPE = "idh_wildtype"
    IDH_MUTANT = "idh_mutant"
    OLIGODENDROGLIOMA = "oligodendroglioma"


def molecular_subtype(idh: Optional[int], codel: Optional[int]) -> Optional[Subtype]:
    """None when IDH is unknown, or when a mutant slide has unknown codeletion"""
    if idh == 0:
        return Subtype.IDH_WILDTYPE
    if idh == 1 and codel is not None:
        return Subtype.OLIGODENDROGLIOMA if codel == 1 else Subtype.IDH_MUTANT
    return None


@dataclass
class SlideRecord:
    """
    One patient slide with its molecular labels and survival follow-up.
    idh: 0 wildtype, 1 mutant; codel: 0 non-codeleted, 1 codeleted;
    event: 1 death observed, 0 censored. None means unknown.
    """
    slide_id: str
    patient_id: str
    image_path: str
    grade: Grade
    idh: Optional[int] = None
    codel: Optional[int] = None
    os_days: Optional[float] = None
    event: Optional[int] = None
    sex: Sex = Sex.UNKNOWN
    age_years: Optional[float] = None
    extra: Dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    @property
    def subtype(self) -> Optional[Subtype]:
        return molecular_subtype(self.idh, self.codel)

    def validate(self, row: Optional[int] = None):
        """Check the record-level invariants"""
        if not self.slide_id:
            raise ManifestError("Missing slide_id", row=row)
        if not self.patient_id:
            raise ManifestError(f"Missing patient_id for slide {self.slide_id}", row=row)
        if self.codel is not None and self.idh != 1:
            raise TaxonomyError(
                f"Codeletion status set on a non-mutant slide {self.slide_id}",
                row=row, details={"idh": self.idh, "codel": self.codel}
            )
        if self.event == 1 and self.os_days is None:
            raise ManifestError(
                f"Observed death without survival time for slide {self.slide_id}", row=row
            )

    def to_row(self) -> Dict[str, str]:
        return {
            "slide_id": self.slide_id,
            "patient_id": self.patient_id,
            "image_path": self.image_path,
            "idh": _format_flag(self.idh),
            "codel": _format_flag(self.codel),
            "grade": self.grade.value,
            "os_days": _format_real(self.os_days),
            "event": _format_flag(self.event),
            "sex": self.sex.value,
            "age": _format_real(self.age_years),
        }


def _format_flag(value: Optional[int]) -> str:
    return NA if value is None else str(int(value))


def _format_real(value: Optional[float]) -> str:
    return NA if value is None else repr(float(value))


def _parse_flag(text: str, column: str, row: int) -> Optional[int]:
    if text == NA:
        return None
    if text in ("0", "1"):
        return int(text)
    raise ManifestParseError(f"Column '{column}' must be 0, 1 or NA, got '{text}'", row=row)


def _parse_real(text: str, column: str, row: int) -> Optional[float]:
    if text == NA:
        return None
    try:
        value = float(text)
    except ValueError:
        raise ManifestParseError(f"Column '{column}' is not a number: '{text}'", row=row)
    if not math.isfinite(value) or value < 0:
        raise ManifestParseError(
            f"Column '{column}' must be a finite nonnegative number, got '{text}'", row=row
        )
    return value


def _parse_enum(enum_cls, text: str, column: str, row: int):
    try:
        return enum_cls(text)
    except ValueError:
        allowed = ", ".join(member.value for member in enum_cls)
        raise ManifestParseError(f"Column '{column}' must be one of {allowed}, got '{text}'", row=row)


def parse_row(values: Dict[str, str], row: int) -> SlideRecord:
    """Build a validated SlideRecord from raw CSV strings"""
    record = SlideRecord(
        slide_id=values["slide_id"].strip(),
        patient_id=values["patient_id"].strip(),
        image_path=values["image_path"],
        idh=_parse_flag(values["idh"], "idh", row),
        codel=_parse_flag(values["codel"], "codel", row),
        grade=_parse_enum(Grade, values["grade"], "grade", row),
        os_days=_parse_real(values["os_days"], "os_days", row),
        event=_parse_flag(values["event"], "event", row),
        sex=_parse_enum(Sex, values["sex"], "sex", row),
        age_years=_parse_real(values["age"], "age", row),
    )
    record.validate(row=row)
    return record


def load_manifest(path) -> List[SlideRecord]:
    """
    Load a slide manifest CSV

    Args:
        path: Manifest file path

    Returns:
        One SlideRecord per data row, in file order

    Raises:
        ManifestError: Missing file, wrong header, missing or duplicate slide_id
        ManifestParseError: Malformed field
        TaxonomyError: Codeletion status on a non-mutant row
    """
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"Manifest not found: {path}")

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise ManifestError(f"Manifest has no header row: {path}")
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise ManifestParseError(f"Cannot parse manifest {path}: {e}")

    if list(frame.columns) != MANIFEST_COLUMNS:
        raise ManifestError(
            "Manifest header does not match the contract",
            row=1, details={"expected": ",".join(MANIFEST_COLUMNS),
                            "found": ",".join(map(str, frame.columns))}
        )

    records: List[SlideRecord] = []
    seen: Dict[str, int] = {}
    for offset, raw in enumerate(frame.itertuples(index=False, name=None)):
        row = offset + 2
        values = {col: ("" if not isinstance(val, str) else val) for col, val in zip(MANIFEST_COLUMNS, raw)}
        record = parse_row(values, row)
        if record.slide_id in seen:
            raise ManifestError(
                f"Duplicate slide_id '{record.slide_id}'",
                row=row, details={"first_row": seen[record.slide_id]}
            )
        seen[record.slide_id] = row
        records.append(record)

    logger.debug(f"[MANIFEST] loaded {len(records)} records from {path}")
    return records


def write_manifest(records: Sequence[SlideRecord], path):
    """
    Write records in the manifest CSV contract

    Raises:
        ManifestError: Duplicate slide_id among records
        OutputPathError: Destination not writable
    """
    seen = set()
    for index, record in enumerate(records):
        record.validate(row=index + 2)
        if record.slide_id in seen:
            raise ManifestError(f"Duplicate slide_id '{record.slide_id}'", row=index + 2)
        seen.add(record.slide_id)

    frame = pd.DataFrame([record.to_row() for record in records], columns=MANIFEST_COLUMNS)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
    except OSError as e:
        raise OutputPathError(f"Cannot write manifest {path}: {e}")


def resolve_image_path(record: SlideRecord, base_dir) -> Path:
    """Image path of a record, relative paths taken from the manifest directory"""
    image_path = Path(record.image_path)
    if image_path.is_absolute():
        return image_path
    return Path(base_dir) / image_path


def class_counts(records: Sequence[SlideRecord], attribute: str) -> Dict[Optional[int], int]:
    """Count records per value of a label attribute (e.g. 'idh')"""
    counts: Dict[Optional[int], int] = {}
    for record in records:
        value = getattr(record, attribute)
        counts[value] = counts.get(value, 0) + 1
    return counts
