# -*- coding: utf-8 -*-
"""
pathflow/nncore/gradcheck.py
Finite-difference verification of the hand-derived backward passes.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Tuple

import numpy as np

from pathflow.core.exceptions import ConfigurationError
from pathflow.core.logger import get_logger
from pathflow.core.seeding import make_rng
from pathflow.nncore.network import ResidualNetwork
from pathflow.nncore.tensor import Mode, as_tensor4

logger = get_logger(__name__)

LossFn = Callable[[np.ndarray], Tuple[float, np.ndarray]]

MIN_SAMPLES = 32
ERROR_FLOOR = 1e-12


@dataclass
class GradCheckReport:
    """Max relative error per parameter block ('layer<i>.<name>', plus 'input' when checked)"""
    block_errors: Dict[str, float] = field(default_factory=dict)
    global_max: float = 0.0
    epsilon: float = 1e-5
    coordinates: int = 0

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.global_max <= tolerance

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "global_max": self.global_max,
            "coordinates": self.coordinates,
            "block_errors": dict(self.block_errors),
        }


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), ERROR_FLOOR)


def _sample_coordinates(size: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    if size <= samples:
        return np.arange(size)
    return np.sort(rng.choice(size, size=samples, replace=False))


def _check_array(array: np.ndarray, analytic: np.ndarray, loss_at: Callable[[], float],
                 epsilon: float, coords: np.ndarray) -> float:
    flat = array.reshape(-1)
    grad = analytic.reshape(-1)
    worst = 0.0
    for i in coords:
        original = flat[i]
        flat[i] = original + epsilon
        plus = loss_at()
        flat[i] = original - epsilon
        minus = loss_at()
        flat[i] = original
        numeric = (plus - minus) / (2.0 * epsilon)
        worst = max(worst, relative_error(float(grad[i]), numeric))
    return worst


def grad_check(net: ResidualNetwork, x, loss_fn: LossFn, epsilon: float = 1e-5,
               samples: int = MIN_SAMPLES, seed: int = 0, mode: Mode = Mode.TRAIN,
               check_input: bool = False) -> GradCheckReport:
    """
    Compare analytic gradients with central differences

    Args:
        net: Network to check (its arrays are perturbed and restored in place)
        x: Input batch
        loss_fn: Maps network outputs to (loss, d loss / d outputs)
        epsilon: Step in [1e-7, 1e-3]
        samples: Coordinates per parameter block (at least 32; all when the block is smaller)
        seed: Seed for coordinate sampling
        mode: Forward mode; running statistics are never updated
        check_input: Also check d loss / d x

    Returns:
        GradCheckReport
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ConfigurationError(f"Gradient-check epsilon must lie in [1e-7, 1e-3], got {epsilon}")
    samples = max(int(samples), MIN_SAMPLES)
    x = as_tensor4(x).copy()
    rng = make_rng(seed, "gradcheck")

    result = net.forward(x, mode, update_running_stats=False)
    _, doutputs = loss_fn(result.outputs)
    grads, dx = net.backward(doutputs, result)

    def loss_at() -> float:
        return float(loss_fn(net.forward(x, mode, update_running_stats=False).outputs)[0])

    report = GradCheckReport(epsilon=epsilon)
    for index, name, array in net.params.named_arrays():
        coords = _sample_coordinates(array.size, samples, rng)
        error = _check_array(array, grads[index][name], loss_at, epsilon, coords)
        report.block_errors[f"layer{index}.{name}"] = error
        report.coordinates += len(coords)

    if check_input:
        coords = _sample_coordinates(x.size, samples, rng)
        report.block_errors["input"] = _check_array(x, dx, loss_at, epsilon, coords)
        report.coordinates += len(coords)

    report.global_max = max(report.block_errors.values(), default=0.0)
    logger.info(f"[GRADCHECK] {len(report.block_errors)} blocks, {report.coordinates} coordinates, "
                f"max relative error {report.global_max:.3e}")
    return report
