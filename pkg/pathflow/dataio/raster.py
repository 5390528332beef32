# -*- coding: utf-8 -*-
"""
pathflow/dataio/raster.py
8-bit RGB raster decoding (PNG, binary PPM) scaled to [0, 1].
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from pathflow.core.exceptions import DecodeError, OutputPathError

SUPPORTED_FORMATS = ("PNG", "PPM")
EIGHT_BIT_MODES = ("RGB", "RGBA", "L", "LA", "P")


@dataclass
class ImageRaster:
    """RGB image with values in [0, 1], stored as (height, width, 3) float64"""
    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.ndim != 3 or pixels.shape[2] != 3 or pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise DecodeError(f"Raster must have shape (height, width, 3), got {pixels.shape}")
        if not np.all(np.isfinite(pixels)) or pixels.min() < 0.0 or pixels.max() > 1.0:
            raise DecodeError("Raster values must be finite and within [0, 1]")
        self.pixels = pixels

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def luminance(self) -> np.ndarray:
        """BT.601 luma, (height, width)"""
        return self.pixels @ np.array([0.299, 0.587, 0.114])

    def to_uint8(self) -> np.ndarray:
        return np.clip(np.rint(self.pixels * 255.0), 0, 255).astype(np.uint8)


def decode_image(path) -> ImageRaster:
    """
    Decode a PNG or binary PPM (P6) file

    Args:
        path: Image file path

    Returns:
        ImageRaster where 8-bit value v maps to v/255

    Raises:
        DecodeError: Missing, unsupported, non-8-bit or truncated file
    """
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            magic = fh.read(2)
        with Image.open(path) as img:
            if img.format not in SUPPORTED_FORMATS:
                raise DecodeError(f"Unsupported image format '{img.format}'", {"path": str(path)})
            if img.format == "PPM" and magic != b"P6":
                raise DecodeError("Only binary PPM (P6) is supported", {"path": str(path)})
            if img.mode not in EIGHT_BIT_MODES:
                raise DecodeError(f"Only 8-bit rasters are supported, got mode '{img.mode}'",
                                  {"path": str(path)})
            img.load()
            data = np.asarray(img.convert("RGB"), dtype=np.uint8)
    except DecodeError:
        raise
    except FileNotFoundError:
        raise DecodeError(f"Image not found: {path}")
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as e:
        raise DecodeError(f"Cannot decode image {path}: {e}")

    return ImageRaster(data.astype(np.float64) / 255.0)


def encode_image(raster: ImageRaster, path) -> Path:
    """
    Write a raster as PNG or PPM, chosen by file suffix

    Raises:
        OutputPathError: Destination not writable or unknown suffix
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in (".png", ".ppm"):
        raise OutputPathError(f"Unsupported image suffix '{suffix}'", {"path": str(path)})
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(raster.to_uint8()).save(path, format=suffix[1:].upper())
    except OSError as e:
        raise OutputPathError(f"Cannot write image {path}: {e}")
    return path
