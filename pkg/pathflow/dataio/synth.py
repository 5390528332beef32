# -*- coding: utf-8 -*-
"""
pathflow/dataio/synth.py
Desk-scale synthetic slide corpus.

Sampling law:
- IDH-mutant slides draw a texture parameter theta ~ U[0, 0.5), wildtype theta ~ U[0.5, 1].
- Tissue discs on white glass carry oriented stripes; stripe frequency and
  contrast grow linearly with theta. Codeleted mutants use a bluer palette.
- Survival is exponential with hazard ln2/baseline_median_days * exp(hazard_beta * theta),
  so hazard increases monotonically with theta. With probability censor_prob the
  subject is censored at U(0, T).
"""

import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd

from pathflow.core.exceptions import ConfigurationError, OutputPathError
from pathflow.core.logger import get_logger
from pathflow.core.seeding import make_rng
from pathflow.dataio.manifest import Grade, Sex, SlideRecord, write_manifest
from pathflow.dataio.raster import ImageRaster, encode_image

logger = get_logger(__name__)

GLASS_LEVEL = 0.97
GLASS_NOISE = 0.004
STRIPE_PERIOD_PX = 64.0

# eosin-like base and hematoxylin-like accent, per palette
PALETTES = {
    "standard": (np.array([0.80, 0.45, 0.65]), np.array([0.35, 0.20, 0.55])),
    "codeleted": (np.array([0.62, 0.52, 0.82]), np.array([0.22, 0.26, 0.62])),
}

# Grade proportions per molecular group
GRADE_MIX = {
    "wildtype": (14, 57, 262),
    "codeleted": (69, 60, 0),
    "noncodeleted": (96, 88, 17),
}
MEAN_AGE = {"wildtype": 57.0, "codeleted": 45.0, "noncodeleted": 38.0}
MALE_FRACTION = 0.58


@dataclass
class CorpusSpec:
    """Synthetic corpus parameters (the `synth` config section)"""
    slides_per_class: int = 30
    image_size: int = 256
    image_format: str = "png"
    discs_per_slide: int = 3
    freq_low: float = 3.0
    freq_high: float = 12.0
    contrast_low: float = 0.15
    contrast_high: float = 0.35
    noise_sigma: float = 0.03
    hazard_beta: float = 8.0
    baseline_median_days: float = 3650.0
    censor_prob: float = 0.2
    codel_fraction: float = 0.4

    def __post_init__(self):
        if self.slides_per_class < 1:
            raise ConfigurationError(f"slides_per_class must be >= 1, got {self.slides_per_class}")
        if self.image_size < 16:
            raise ConfigurationError(f"image_size must be >= 16, got {self.image_size}")
        if self.image_format not in ("png", "ppm"):
            raise ConfigurationError(f"image_format must be png or ppm, got {self.image_format}")
        if self.discs_per_slide < 1:
            raise ConfigurationError("discs_per_slide must be >= 1")
        if not 0.0 <= self.censor_prob <= 1.0:
            raise ConfigurationError(f"censor_prob must lie in [0, 1], got {self.censor_prob}")
        if not 0.0 <= self.codel_fraction <= 1.0:
            raise ConfigurationError(f"codel_fraction must lie in [0, 1], got {self.codel_fraction}")
        if self.baseline_median_days <= 0:
            raise ConfigurationError("baseline_median_days must be > 0")
        if self.contrast_high > 0.5 or self.contrast_low < 0:
            raise ConfigurationError("contrasts must lie in [0, 0.5]")

    @classmethod
    def from_mapping(cls, values: Optional[Mapping[str, Any]]) -> "CorpusSpec":
        values = dict(values or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigurationError(f"Unknown synth keys: {', '.join(unknown)}")
        return cls(**values)


@dataclass
class SynthCorpus:
    manifest_path: Path
    records: List[SlideRecord]
    thetas: Dict[str, float] = field(default_factory=dict)


def theta_to_hazard(theta, spec: CorpusSpec):
    """Hazard rate per day for texture parameter theta"""
    return math.log(2.0) / spec.baseline_median_days * np.exp(spec.hazard_beta * np.asarray(theta))


def sample_survival(theta, rng: np.random.Generator, spec: CorpusSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw (os_days, event) for an array of theta under the generator's law

    Returns:
        os_days float array, event int array (1 death observed, 0 censored)
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    death = rng.exponential(1.0 / theta_to_hazard(theta, spec))
    censored = rng.random(theta.shape) < spec.censor_prob
    censor_time = rng.uniform(0.0, death)
    os_days = np.where(censored, censor_time, death)
    return os_days, (~censored).astype(np.int64)


def texture_field(theta: float, codeleted: bool, shape: Tuple[int, int],
                  rng: np.random.Generator, spec: CorpusSpec) -> np.ndarray:
    """Full-frame stained texture for one slide, (height, width, 3) in [0, 1]"""
    height, width = shape
    frequency = spec.freq_low + theta * (spec.freq_high - spec.freq_low)
    contrast = spec.contrast_low + theta * (spec.contrast_high - spec.contrast_low)
    angle = rng.uniform(0.0, math.pi)
    phase = rng.uniform(0.0, 2.0 * math.pi)

    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    omega = 2.0 * math.pi * frequency / STRIPE_PERIOD_PX
    stripes = np.sin(omega * (xs * math.cos(angle) + ys * math.sin(angle)) + phase)

    base, accent = PALETTES["codeleted" if codeleted else "standard"]
    weight = (0.5 + contrast * stripes)[..., None]
    rgb = base * (1.0 - weight) + accent * weight
    rgb = rgb + rng.normal(0.0, spec.noise_sigma, size=rgb.shape)
    return np.clip(rgb, 0.0, 1.0)


def disc_mask(shape: Tuple[int, int], centers, radii) -> np.ndarray:
    height, width = shape
    ys, xs = np.mgrid[0:height, 0:width]
    mask = np.zeros(shape, dtype=bool)
    for (cx, cy), radius in zip(centers, radii):
        mask |= (xs - cx) ** 2 + (ys - cy) ** 2 <= radius ** 2
    return mask


def compose_slide(texture: np.ndarray, tissue: np.ndarray, rng: np.random.Generator) -> ImageRaster:
    """Place texture on glass where tissue is True"""
    glass = GLASS_LEVEL + rng.normal(0.0, GLASS_NOISE, size=texture.shape)
    pixels = np.where(tissue[..., None], texture, np.clip(glass, 0.0, 1.0))
    return ImageRaster(pixels)


def render_slide(theta: float, codeleted: bool, rng: np.random.Generator,
                 spec: CorpusSpec) -> Tuple[ImageRaster, np.ndarray]:
    """
    Render one slide

    Returns:
        (raster, ground-truth tissue mask)
    """
    size = spec.image_size
    centers = [(size / 2.0, size / 2.0)]
    radii = [0.35 * size]
    for _ in range(spec.discs_per_slide - 1):
        centers.append(tuple(rng.uniform(0.2 * size, 0.8 * size, size=2)))
        radii.append(rng.uniform(0.15 * size, 0.3 * size))
    tissue = disc_mask((size, size), centers, radii)
    texture = texture_field(theta, codeleted, (size, size), rng, spec)
    return compose_slide(texture, tissue, rng), tissue


def _group(idh: int, codel: Optional[int]) -> str:
    if idh == 0:
        return "wildtype"
    return "codeleted" if codel == 1 else "noncodeleted"


def synth_corpus(spec: CorpusSpec, seed: int, out_dir) -> SynthCorpus:
    """
    Generate images plus a manifest under out_dir

    Args:
        spec: Corpus parameters
        seed: Root seed (substream 'synth')
        out_dir: Output directory; receives manifest.csv, latent.csv and images/

    Raises:
        OutputPathError: Output directory not writable
    """
    out_dir = Path(out_dir)
    image_dir = out_dir / "images"
    try:
        image_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputPathError(f"Cannot create corpus directory {out_dir}: {e}")

    records: List[SlideRecord] = []
    thetas: Dict[str, float] = {}
    index = 0
    for idh in (0, 1):
        for _ in range(spec.slides_per_class):
            slide_id = f"SYN-{index:04d}"
            rng = make_rng(seed, "synth", slide_id)

            theta = rng.uniform(0.5, 1.0) if idh == 0 else rng.uniform(0.0, 0.5)
            codel = None
            if idh == 1:
                codel = int(rng.random() < spec.codel_fraction)
            group = _group(idh, codel)

            mix = np.asarray(GRADE_MIX[group], dtype=np.float64)
            grade = [Grade.II, Grade.III, Grade.IV][rng.choice(3, p=mix / mix.sum())]
            sex = Sex.MALE if rng.random() < MALE_FRACTION else Sex.FEMALE
            age = float(np.clip(rng.normal(MEAN_AGE[group], 10.0), 18.0, 90.0))
            os_days, event = sample_survival(theta, rng, spec)

            raster, _ = render_slide(theta, codel == 1, rng, spec)
            relative = Path("images") / f"{slide_id}.{spec.image_format}"
            encode_image(raster, out_dir / relative)

            records.append(SlideRecord(
                slide_id=slide_id,
                patient_id=f"PAT-{index:04d}",
                image_path=relative.as_posix(),
                idh=idh,
                codel=codel,
                grade=grade,
                os_days=float(os_days[0]),
                event=int(event[0]),
                sex=sex,
                age_years=round(age, 1),
            ))
            thetas[slide_id] = float(theta)
            index += 1

    manifest_path = out_dir / "manifest.csv"
    write_manifest(records, manifest_path)
    try:
        pd.DataFrame({"slide_id": list(thetas), "theta": list(thetas.values())}).to_csv(
            out_dir / "latent.csv", index=False, lineterminator="\n"
        )
    except OSError as e:
        raise OutputPathError(f"Cannot write latent table: {e}")

    logger.info(f"[SYNTH] wrote {len(records)} slides to {out_dir}")
    return SynthCorpus(manifest_path=manifest_path, records=records, thetas=thetas)
