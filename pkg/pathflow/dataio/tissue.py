# -*- coding: utf-8 -*-
"""
pathflow/dataio/tissue.py
Automatic tissue mask from local luminance statistics.

A pixel is tissue when its WxW neighbourhood is darker than the glass
(mean luminance < white_thresh) or textured (luminance variance > var_thresh).
"""

import numpy as np
from scipy.ndimage import uniform_filter

from pathflow.core.exceptions import ConfigurationError
from pathflow.dataio.raster import ImageRaster

DEFAULT_WINDOW = 16
DEFAULT_WHITE_THRESH = 0.85
DEFAULT_VAR_THRESH = 0.002


def local_luminance_stats(img: ImageRaster, window: int = DEFAULT_WINDOW):
    """Windowed mean and variance of luminance, each (height, width)"""
    luma = img.luminance()
    mean = uniform_filter(luma, size=window, mode="reflect")
    mean_sq = uniform_filter(luma * luma, size=window, mode="reflect")
    variance = np.maximum(mean_sq - mean * mean, 0.0)
    return mean, variance


def tissue_mask(img: ImageRaster,
                white_thresh: float = DEFAULT_WHITE_THRESH,
                var_thresh: float = DEFAULT_VAR_THRESH,
                window: int = DEFAULT_WINDOW) -> np.ndarray:
    """
    Boolean tissue mask

    Args:
        img: Source raster
        white_thresh: Mean-luminance cut in (0, 1)
        var_thresh: Variance cut, >= 0
        window: Neighbourhood size in pixels

    Returns:
        (height, width) boolean array; may be empty
    """
    if not 0.0 < white_thresh < 1.0:
        raise ConfigurationError(f"white_thresh must lie in (0, 1), got {white_thresh}")
    if var_thresh < 0.0:
        raise ConfigurationError(f"var_thresh must be >= 0, got {var_thresh}")
    if window < 1:
        raise ConfigurationError(f"window must be >= 1, got {window}")

    mean, variance = local_luminance_stats(img, window)
    return (mean < white_thresh) | (variance > var_thresh)
