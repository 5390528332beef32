# -*- coding: utf-8 -*-
"""
pathflow/dataio/patches.py
Fixed-size patch sampling from tissue-bearing positions.
"""

from dataclasses import dataclass
from typing import List

import numpy as np

from pathflow.core.exceptions import ConfigurationError, NoTissueError
from pathflow.dataio.raster import ImageRaster


@dataclass
class PatchSet:
    """
    Patches of one slide.
    patches: (n, 3, p, p) float64; origins: (n, 2) top-left (x, y) pixel offsets
    """
    slide_id: str
    patches: np.ndarray
    origins: np.ndarray
    with_replacement: bool = False

    def __len__(self) -> int:
        return self.patches.shape[0]

    @property
    def patch_size(self) -> int:
        return self.patches.shape[-1]

    def patch(self, index: int) -> np.ndarray:
        """One patch as a (1, 3, p, p) tensor"""
        return self.patches[index:index + 1]

    def origin_list(self) -> List[tuple]:
        return [(int(x), int(y)) for x, y in self.origins]


def valid_origins(mask: np.ndarray, p: int) -> np.ndarray:
    """
    Top-left origins whose patch lies inside the image and whose center is tissue

    Returns:
        (k, 2) int array of (x, y), row-major order
    """
    height, width = mask.shape
    half = p // 2
    centers = mask[half:half + height - p + 1, half:half + width - p + 1]
    ys, xs = np.nonzero(centers)
    return np.stack([xs, ys], axis=1).astype(np.int64)


def extract_patches(img: ImageRaster, mask: np.ndarray, n: int, p: int, seed: int,
                    slide_id: str = "") -> PatchSet:
    """
    Sample n patches of size p x p centered on tissue

    Sampling is uniform without replacement over valid positions, switching
    to with-replacement (flag set) when fewer than n positions exist.

    Args:
        img: Source raster
        mask: Boolean tissue mask with the raster's height and width
        n: Number of patches
        p: Patch side in pixels
        seed: Sampling seed (callers derive it per slide)
        slide_id: Slide identifier, used in errors and the result

    Raises:
        ConfigurationError: n < 1, p larger than the image, or mask shape mismatch
        NoTissueError: No valid tissue position
    """
    if n < 1:
        raise ConfigurationError(f"patches_per_slide must be >= 1, got {n}")
    if p < 1 or p > min(img.width, img.height):
        raise ConfigurationError(
            f"Patch size {p} does not fit image {img.width}x{img.height}", {"slide_id": slide_id}
        )
    if mask.shape != (img.height, img.width):
        raise ConfigurationError(
            f"Mask shape {mask.shape} does not match image {(img.height, img.width)}",
            {"slide_id": slide_id}
        )

    candidates = valid_origins(mask, p)
    if len(candidates) == 0:
        raise NoTissueError(f"No tissue-bearing patch position in slide '{slide_id}'",
                            {"slide_id": slide_id, "patch_size": p})

    rng = np.random.default_rng(seed)
    with_replacement = len(candidates) < n
    chosen = rng.choice(len(candidates), size=n, replace=with_replacement)
    origins = candidates[chosen]

    patches = np.empty((n, 3, p, p), dtype=np.float64)
    for i, (x, y) in enumerate(origins):
        patches[i] = img.pixels[y:y + p, x:x + p].transpose(2, 0, 1)

    return PatchSet(slide_id=slide_id, patches=patches, origins=origins,
                    with_replacement=bool(with_replacement))
