# -*- coding: utf-8 -*-
"""
pathflow/harness/patch_pipeline.py
Slide -> patches fan-out, per-channel standardization and chunked eval-mode inference.
Workers never change results: extraction is seeded per slide and inference
runs over fixed-size chunks collected in submission order.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from pathflow.core.logger import get_logger
from pathflow.core.seeding import derive_seed, slide_seed
from pathflow.dataio.manifest import SlideRecord, resolve_image_path
from pathflow.dataio.patch_cache import read_patch_set, write_patch_set
from pathflow.dataio.patches import PatchSet, extract_patches
from pathflow.dataio.raster import decode_image
from pathflow.dataio.tissue import tissue_mask
from pathflow.harness.experiment_config import ExperimentConfig
from pathflow.metrics.metrics_collector import MetricsCollector
from pathflow.nncore.network import ResidualNetwork

logger = get_logger(__name__)

STD_FLOOR = 1e-8


def _extract_one(record: SlideRecord, base_dir: Path, cfg: ExperimentConfig,
                 cache_dir: Optional[Path]):
    cache_path = cache_dir / f"{record.slide_id}.pfps" if cache_dir is not None else None
    if cache_path is not None and cache_path.exists():
        return read_patch_set(cache_path, slide_id=record.slide_id), True

    img = decode_image(resolve_image_path(record, base_dir))
    mask = tissue_mask(img, cfg.white_thresh, cfg.var_thresh)
    seed = slide_seed(derive_seed(cfg.seed, "patches"), record.slide_id)
    patch_set = extract_patches(img, mask, cfg.patches_per_slide, cfg.patch_size, seed,
                                slide_id=record.slide_id)
    if cache_path is not None:
        write_patch_set(patch_set, cache_path)
        patch_set = read_patch_set(cache_path, slide_id=record.slide_id)
    return patch_set, False


def extract_all(records: Sequence[SlideRecord], base_dir, cfg: ExperimentConfig,
                cache_dir=None, collector: Optional[MetricsCollector] = None) -> Dict[str, PatchSet]:
    """
    PatchSets for every record, keyed by slide_id in record order

    Args:
        records: Slides to process
        base_dir: Directory relative image paths resolve against
        cfg: Patch count/size, tissue thresholds, seed and worker count
        cache_dir: PFPS cache directory, used when cfg.patch_cache is set
        collector: Optional telemetry sink
    """
    base_dir = Path(base_dir)
    cache = Path(cache_dir) if (cfg.patch_cache and cache_dir is not None) else None
    results = Parallel(n_jobs=cfg.workers, prefer="threads")(
        delayed(_extract_one)(record, base_dir, cfg, cache) for record in records
    )

    patch_sets: Dict[str, PatchSet] = {}
    for record, (patch_set, cached) in zip(records, results):
        patch_sets[record.slide_id] = patch_set
        if patch_set.with_replacement:
            logger.warning(f"[PATCHES] {record.slide_id}: fewer tissue positions than "
                           f"{cfg.patches_per_slide}, sampled with replacement")
        if collector is not None:
            collector.increment("slides_extracted")
            collector.increment("patches_extracted", len(patch_set))
            collector.increment("replacement_slides", int(patch_set.with_replacement))
            collector.increment("cache_hits", int(cached))
    logger.info(f"[PATCHES] {len(patch_sets)} slides x {cfg.patches_per_slide} patches "
                f"of {cfg.patch_size}px" + (f" (cache {cache})" if cache else ""))
    return patch_sets


@dataclass
class ChannelStats:
    """Per-channel mean and standard deviation of the training patches"""
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def from_patches(cls, patches: np.ndarray) -> "ChannelStats":
        mean = patches.mean(axis=(0, 2, 3))
        std = np.maximum(patches.std(axis=(0, 2, 3)), STD_FLOOR)
        return cls(mean=mean, std=std)

    def apply(self, patches: np.ndarray) -> np.ndarray:
        return (patches - self.mean[None, :, None, None]) / self.std[None, :, None, None]

    def to_dict(self):
        return {"mean": [float(v) for v in self.mean], "std": [float(v) for v in self.std]}

    @classmethod
    def from_dict(cls, data) -> "ChannelStats":
        return cls(mean=np.asarray(data["mean"], dtype=np.float64),
                   std=np.asarray(data["std"], dtype=np.float64))


def stack_patches(patch_sets: Dict[str, PatchSet], slide_ids: Sequence[str]) -> np.ndarray:
    return np.concatenate([patch_sets[sid].patches for sid in slide_ids], axis=0)


def predict_outputs(net: ResidualNetwork, patches: np.ndarray, cfg: ExperimentConfig,
                    collector: Optional[MetricsCollector] = None) -> np.ndarray:
    """Eval-mode head inputs for standardized patches, chunked by eval_batch_size"""
    size = cfg.eval_batch_size

    def run(start: int) -> np.ndarray:
        if collector is None:
            return net.predict(patches[start:start + size]).outputs
        with collector.timed("inference"):
            collector.increment("inference_chunks")
            return net.predict(patches[start:start + size]).outputs

    chunks = Parallel(n_jobs=cfg.workers, prefer="threads")(
        delayed(run)(start) for start in range(0, patches.shape[0], size)
    )
    return np.concatenate(chunks)


def predict_slides(net: ResidualNetwork, stats: ChannelStats, patch_sets: Dict[str, PatchSet],
                   slide_ids: Sequence[str], cfg: ExperimentConfig,
                   collector: Optional[MetricsCollector] = None) -> Dict[str, np.ndarray]:
    """slide_id -> per-patch head inputs (logits or risks)"""
    if not slide_ids:
        return {}
    outputs = predict_outputs(net, stats.apply(stack_patches(patch_sets, slide_ids)), cfg, collector)
    result: Dict[str, np.ndarray] = {}
    offset = 0
    for sid in slide_ids:
        count = len(patch_sets[sid])
        result[sid] = outputs[offset:offset + count]
        offset += count
    return result
