"""
Tensor4 conventions
Activations, weights and gradients are float64 numpy arrays; activations are (n, c, h, w)
"""

from enum import Enum

import numpy as np

from pathflow.core.exceptions import NonFiniteError, ShapeError

DTYPE = np.float64


class Mode(Enum):
    """Forward-pass mode (batch statistics vs running statistics)"""
    TRAIN = "train"
    EVAL = "eval"


def as_tensor4(x, layer=None) -> np.ndarray:
    """Validate and convert to a float64 (n, c, h, w) array"""
    array = np.asarray(x, dtype=DTYPE)
    if array.ndim != 4 or min(array.shape) < 1:
        raise ShapeError(f"Expected a non-empty (n, c, h, w) tensor, got shape {array.shape}",
                         layer=layer)
    return array


def check_finite(x: np.ndarray, layer=None, what: str = "activation") -> np.ndarray:
    """Reject NaN/Inf at a layer boundary"""
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"Non-finite {what} at layer {layer}", layer=layer)
    return x
