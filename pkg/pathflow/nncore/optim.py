"""
SGD with momentum and L2 weight decay
v <- momentum*v + g + weight_decay*w ; w <- w - lr*v
"""

from typing import Dict, List, Optional

import numpy as np

from pathflow.core.exceptions import ConfigurationError, NonFiniteError, ShapeError
from pathflow.nncore.params import NetworkParams

Velocity = List[Dict[str, np.ndarray]]


def _check_grads(params: NetworkParams, grads):
    if len(grads) != len(params):
        raise ShapeError(f"Expected {len(params)} gradient blocks, got {len(grads)}")
    for index, block in enumerate(params.blocks):
        for name, array in block.arrays.items():
            grad = grads[index].get(name)
            if grad is None or grad.shape != array.shape:
                raise ShapeError(f"Gradient for {name} missing or misshaped", layer=index)
            if not np.all(np.isfinite(grad)):
                raise NonFiniteError(f"Non-finite gradient for {name}; step aborted", layer=index)


def sgd_step(params: NetworkParams, grads, lr: float, momentum: float = 0.0,
             weight_decay: float = 0.0, velocity: Optional[Velocity] = None) -> Velocity:
    """
    Update trainable arrays in place; BN running statistics are untouched

    Args:
        params: Network parameters
        grads: Per-layer gradient dicts aligned with params
        lr: Learning rate > 0
        momentum: Momentum coefficient in [0, 1)
        weight_decay: L2 coefficient >= 0
        velocity: Previous velocity (zeros when None)

    Returns:
        New velocity

    Raises:
        NonFiniteError: Any gradient holds NaN/Inf (no array is modified)
    """
    if lr <= 0:
        raise ConfigurationError(f"Learning rate must be > 0, got {lr}")
    if not 0.0 <= momentum < 1.0:
        raise ConfigurationError(f"Momentum must lie in [0, 1), got {momentum}")
    if weight_decay < 0:
        raise ConfigurationError(f"Weight decay must be >= 0, got {weight_decay}")

    _check_grads(params, grads)
    if velocity is None:
        velocity = params.zeros_like()

    new_velocity: Velocity = []
    for index, block in enumerate(params.blocks):
        layer_velocity = {}
        for name, w in block.arrays.items():
            v = momentum * velocity[index][name] + grads[index][name] + weight_decay * w
            w -= lr * v
            layer_velocity[name] = v
        new_velocity.append(layer_velocity)
    return new_velocity


class SGDOptimizer:
    """Holds the velocity between steps"""

    def __init__(self, params: NetworkParams, lr: float, momentum: float = 0.9,
                 weight_decay: float = 0.0):
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity: Optional[Velocity] = None
        self.steps = 0

    def step(self, grads):
        self.velocity = sgd_step(self.params, grads, self.lr, self.momentum,
                                 self.weight_decay, self.velocity)
        self.steps += 1
