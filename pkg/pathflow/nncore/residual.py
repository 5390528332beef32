"""
Residual block: y = relu(bn2(conv2(relu(bn1(conv1(x))))) + shortcut(x))
The shortcut is identity, or a strided 1x1 projection when stride > 1 or channels change
"""

from typing import Dict, Optional, Tuple

import numpy as np

from pathflow.core.exceptions import ShapeError
from pathflow.nncore import layers
from pathflow.nncore.layer_spec import LayerSpec
from pathflow.nncore.params import ParamBlock
from pathflow.nncore.tensor import Mode


def residual_block_forward(x: np.ndarray, block: ParamBlock, spec: LayerSpec,
                           mode: Mode = Mode.TRAIN, layer: Optional[int] = None):
    """
    Returns:
        (y, cache, running) with running mapping buffer names to updated
        statistics in train mode (empty in eval mode)
    """
    a = block.arrays
    b = block.buffers
    running: Dict[str, np.ndarray] = {}

    h, conv1 = layers.conv2d_forward(x, a["conv1.w"], None, spec.stride, 1, layer)
    h, bn1, run1 = layers.batchnorm_forward(h, a["bn1.gamma"], a["bn1.beta"], b["bn1.running_mean"],
                                            b["bn1.running_var"], mode, layer=layer)
    h, relu1 = layers.relu_forward(h)
    h, conv2 = layers.conv2d_forward(h, a["conv2.w"], None, 1, 1, layer)
    h, bn2, run2 = layers.batchnorm_forward(h, a["bn2.gamma"], a["bn2.beta"], b["bn2.running_mean"],
                                            b["bn2.running_var"], mode, layer=layer)
    for prefix, run in (("bn1.", run1), ("bn2.", run2)):
        if run is not None:
            running[f"{prefix}running_mean"], running[f"{prefix}running_var"] = run

    if spec.needs_projection:
        shortcut, proj = layers.conv2d_forward(x, a["proj.w"], a["proj.b"], spec.stride, 0, layer)
    else:
        shortcut, proj = x, None
    if shortcut.shape != h.shape:
        raise ShapeError(f"Residual branch {h.shape} and shortcut {shortcut.shape} disagree",
                         layer=layer)

    y, relu_out = layers.relu_forward(h + shortcut)
    cache = (conv1, bn1, relu1, conv2, bn2, proj, relu_out)
    return y, cache, running


def residual_block_backward(dy: np.ndarray, cache) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    conv1, bn1, relu1, conv2, bn2, proj, relu_out = cache
    grads: Dict[str, np.ndarray] = {}

    dsum = layers.relu_backward(dy, relu_out)
    if proj is not None:
        dx_short, grads["proj.w"], grads["proj.b"] = layers.conv2d_backward(dsum, proj)
    else:
        dx_short = dsum

    dh, grads["bn2.gamma"], grads["bn2.beta"] = layers.batchnorm_backward(dsum, bn2)
    dh, grads["conv2.w"], _ = layers.conv2d_backward(dh, conv2)
    dh = layers.relu_backward(dh, relu1)
    dh, grads["bn1.gamma"], grads["bn1.beta"] = layers.batchnorm_backward(dh, bn1)
    dx, grads["conv1.w"], _ = layers.conv2d_backward(dh, conv1)
    return dx + dx_short, grads


def residual_block(x, block: ParamBlock, spec: LayerSpec, mode: Mode = Mode.TRAIN) -> np.ndarray:
    return residual_block_forward(np.asarray(x, dtype=np.float64), block, spec, mode)[0]
