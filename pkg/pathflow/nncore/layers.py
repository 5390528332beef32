"""
Layer primitives with hand-derived backward passes

Each primitive comes as a `<name>_forward` returning (output, cache) and a
`<name>_backward` consuming the upstream gradient and that cache. Convolution
is cross-correlation (no kernel flip) computed through im2col.
"""

from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from pathflow.core.exceptions import BatchSizeError, ShapeError
from pathflow.nncore.tensor import DTYPE, Mode

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------

def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(DTYPE)


def init_conv_weight(rng: np.random.Generator, out_channels: int, in_channels: int,
                     kernel: int) -> np.ndarray:
    return glorot_uniform(rng, (out_channels, in_channels, kernel, kernel),
                          in_channels * kernel * kernel, out_channels * kernel * kernel)


def init_dense_weight(rng: np.random.Generator, in_features: int, units: int) -> np.ndarray:
    return glorot_uniform(rng, (in_features, units), in_features, units)


# ---------------------------------------------------------------------------
# Convolution
# ---------------------------------------------------------------------------

def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def _im2col(xp: np.ndarray, kernel: int, stride: int, out_h: int, out_w: int) -> np.ndarray:
    n, c = xp.shape[:2]
    windows = sliding_window_view(xp, (kernel, kernel), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride][:, :, :out_h, :out_w]
    return windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * out_h * out_w, c * kernel * kernel)


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: Optional[np.ndarray],
                   stride: int = 1, padding: int = 0, layer=None):
    """
    2-D cross-correlation

    Args:
        x: (n, c, h, w) input
        w: (f, c, k, k) kernels
        b: (f,) bias or None
        stride: Step >= 1
        padding: Zero padding on every side

    Returns:
        ((n, f, h', w') output with h' = floor((h + 2*pad - k)/stride) + 1, cache)
    """
    if stride < 1:
        raise ShapeError(f"Convolution stride must be >= 1, got {stride}", layer=layer)
    n, c, h, width = x.shape
    f, wc, k, k2 = w.shape
    if wc != c or k != k2:
        raise ShapeError(
            f"Convolution expects {wc} input channels with square kernels, got input {x.shape} "
            f"and kernel {w.shape}", layer=layer
        )
    out_h = conv_output_size(h, k, stride, padding)
    out_w = conv_output_size(width, k, stride, padding)
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"Kernel {k} does not fit input {h}x{width} with padding {padding}",
                         layer=layer)

    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    cols = _im2col(xp, k, stride, out_h, out_w)
    out = cols @ w.reshape(f, -1).T
    if b is not None:
        out += b
    y = out.reshape(n, out_h, out_w, f).transpose(0, 3, 1, 2)
    cache = (xp, w, b is not None, stride, padding, x.shape, out_h, out_w)
    return np.ascontiguousarray(y), cache


def conv2d_backward(dy: np.ndarray, cache) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    """Gradients (dx, dw, db) of a convolution; db is None for bias-free layers"""
    xp, w, has_bias, stride, padding, x_shape, out_h, out_w = cache
    n, c, h, width = x_shape
    f, _, k, _ = w.shape

    dy2 = dy.transpose(0, 2, 3, 1).reshape(-1, f)
    cols = _im2col(xp, k, stride, out_h, out_w)
    dw = (dy2.T @ cols).reshape(w.shape)
    db = dy2.sum(axis=0) if has_bias else None

    dcols = (dy2 @ w.reshape(f, -1)).reshape(n, out_h, out_w, c, k, k)
    dxp = np.zeros(xp.shape, dtype=DTYPE)
    for i in range(k):
        for j in range(k):
            dxp[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += \
                dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    dx = dxp[:, :, padding:padding + h, padding:padding + width] if padding else dxp
    return np.ascontiguousarray(dx), dw, db


def conv2d(x, w, b=None, stride: int = 1, padding: int = 0) -> np.ndarray:
    return conv2d_forward(np.asarray(x, dtype=DTYPE), np.asarray(w, dtype=DTYPE),
                          None if b is None else np.asarray(b, dtype=DTYPE), stride, padding)[0]


# ---------------------------------------------------------------------------
# Batch normalization
# ---------------------------------------------------------------------------

def batchnorm_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
                      running_mean: np.ndarray, running_var: np.ndarray,
                      mode: Mode = Mode.TRAIN, momentum: float = BN_MOMENTUM,
                      eps: float = BN_EPS, layer=None):
    """
    Per-channel normalization over (n, h, w)

    Returns:
        (output, cache, running) where running is the updated
        (mean, var) pair in train mode and None in eval mode
    """
    n, c, h, width = x.shape
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"Batch norm expects {gamma.shape[0]} channels, got {c}", layer=layer)

    running = None
    if mode is Mode.TRAIN:
        if n < 2:
            raise BatchSizeError(f"Batch norm in train mode needs a batch of at least 2, got {n}",
                                 layer=layer)
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        count = n * h * width
        unbiased = var * count / max(count - 1, 1)
        running = (momentum * running_mean + (1.0 - momentum) * mean,
                   momentum * running_var + (1.0 - momentum) * unbiased)
    else:
        mean, var = running_mean, running_var

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    y = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    cache = (xhat, gamma, inv_std, mode)
    return y, cache, running


def batchnorm_backward(dy: np.ndarray, cache) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dgamma, dbeta)"""
    xhat, gamma, inv_std, mode = cache
    dgamma = (dy * xhat).sum(axis=(0, 2, 3))
    dbeta = dy.sum(axis=(0, 2, 3))
    dxhat = dy * gamma[None, :, None, None]
    scale = inv_std[None, :, None, None]

    if mode is not Mode.TRAIN:
        return dxhat * scale, dgamma, dbeta

    count = dy.shape[0] * dy.shape[2] * dy.shape[3]
    mean_dxhat = dxhat.sum(axis=(0, 2, 3), keepdims=True) / count
    mean_dxhat_xhat = (dxhat * xhat).sum(axis=(0, 2, 3), keepdims=True) / count
    dx = scale * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)
    return dx, dgamma, dbeta


def batchnorm(x, scale, shift, mode: Mode = Mode.TRAIN,
              running_mean=None, running_var=None) -> np.ndarray:
    x = np.asarray(x, dtype=DTYPE)
    c = x.shape[1]
    running_mean = np.zeros(c) if running_mean is None else np.asarray(running_mean, dtype=DTYPE)
    running_var = np.ones(c) if running_var is None else np.asarray(running_var, dtype=DTYPE)
    return batchnorm_forward(x, np.asarray(scale, dtype=DTYPE), np.asarray(shift, dtype=DTYPE),
                             running_mean, running_var, mode)[0]


# ---------------------------------------------------------------------------
# Activations and pooling
# ---------------------------------------------------------------------------

def relu_forward(x: np.ndarray):
    positive = x > 0
    return x * positive, positive


def relu_backward(dy: np.ndarray, cache) -> np.ndarray:
    return dy * cache


def relu(x) -> np.ndarray:
    return relu_forward(np.asarray(x, dtype=DTYPE))[0]


def maxpool2_forward(x: np.ndarray, layer=None):
    """2x2 max pooling, stride 2; ties resolve to the first row-major maximum"""
    n, c, h, width = x.shape
    if h % 2 or width % 2:
        raise ShapeError(f"Max pooling needs even spatial dims, got {h}x{width}", layer=layer)
    windows = x.reshape(n, c, h // 2, 2, width // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    windows = windows.reshape(n, c, h // 2, width // 2, 4)
    argmax = windows.argmax(axis=-1)
    y = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]
    return y, (argmax, x.shape)


def maxpool2_backward(dy: np.ndarray, cache) -> np.ndarray:
    argmax, x_shape = cache
    n, c, h, width = x_shape
    dwindows = np.zeros((n, c, h // 2, width // 2, 4), dtype=DTYPE)
    np.put_along_axis(dwindows, argmax[..., None], dy[..., None], axis=-1)
    dx = dwindows.reshape(n, c, h // 2, width // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return dx.reshape(x_shape)


def maxpool2(x) -> np.ndarray:
    return maxpool2_forward(np.asarray(x, dtype=DTYPE))[0]


def global_avg_pool_forward(x: np.ndarray):
    return x.mean(axis=(2, 3), keepdims=True), x.shape


def global_avg_pool_backward(dy: np.ndarray, cache) -> np.ndarray:
    n, c, h, width = cache
    return np.broadcast_to(dy / (h * width), cache).copy()


# ---------------------------------------------------------------------------
# Dense
# ---------------------------------------------------------------------------

def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, layer=None):
    """Fully connected layer on the flattened input; output (n, units, 1, 1)"""
    n = x.shape[0]
    flat = x.reshape(n, -1)
    if flat.shape[1] != w.shape[0]:
        raise ShapeError(f"Dense layer expects {w.shape[0]} features, got {flat.shape[1]}",
                         layer=layer)
    y = flat @ w + b
    return y.reshape(n, w.shape[1], 1, 1), (flat, w, x.shape)


def dense_backward(dy: np.ndarray, cache) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    flat, w, x_shape = cache
    dy2 = dy.reshape(dy.shape[0], -1)
    dw = flat.T @ dy2
    db = dy2.sum(axis=0)
    dx = (dy2 @ w.T).reshape(x_shape)
    return dx, dw, db
