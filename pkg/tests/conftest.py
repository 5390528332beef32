"""
Shared fixtures: config isolation, seeded generators, record builders,
a small synthetic corpus and a central-difference helper.
"""

from typing import Callable, Optional

import numpy as np
import pytest

from pathflow.core.config import Config
from pathflow.dataio.manifest import Grade, SlideRecord
from pathflow.dataio.synth import CorpusSpec, synth_corpus


@pytest.fixture(autouse=True)
def fresh_config():
    """Every test starts and ends on the shipped defaults"""
    Config().reload()
    yield Config()
    Config().reload()


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def make_record(index: int, idh: Optional[int] = 0, codel: Optional[int] = None,
                grade: Grade = Grade.IV, os_days: Optional[float] = 500.0,
                event: Optional[int] = 1, patient_id: Optional[str] = None) -> SlideRecord:
    return SlideRecord(
        slide_id=f"S-{index:04d}",
        patient_id=patient_id or f"P-{index:04d}",
        image_path=f"images/S-{index:04d}.png",
        idh=idh,
        codel=codel,
        grade=grade,
        os_days=os_days,
        event=event,
    )


@pytest.fixture
def record_factory():
    return make_record


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """8 slides per IDH class, 64x64 images"""
    out = tmp_path_factory.mktemp("corpus")
    spec = CorpusSpec(slides_per_class=8, image_size=64, discs_per_slide=2)
    return synth_corpus(spec, seed=3, out_dir=out)


def central_difference(fn: Callable[[], float], array: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Numeric gradient of fn() with respect to every entry of array (perturbed in place)"""
    grad = np.zeros_like(array)
    flat = array.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + eps
        plus = fn()
        flat[i] = original - eps
        minus = fn()
        flat[i] = original
        out[i] = (plus - minus) / (2.0 * eps)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric) / denom))


@pytest.fixture
def numeric_grad():
    return central_difference


@pytest.fixture
def rel_error():
    return max_relative_error
