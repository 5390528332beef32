# -*- coding: utf-8 -*-
"""
pathflow/nncore/network.py
Sequential residual network over a LayerSpec list: forward with caches, backward to parameter gradients.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from pathflow.core.exceptions import ShapeError
from pathflow.core.seeding import make_rng
from pathflow.nncore import layers
from pathflow.nncore.layer_spec import LayerKind, LayerSpec, compose_output_shape
from pathflow.nncore.params import NetworkParams
from pathflow.nncore.residual import residual_block_backward, residual_block_forward
from pathflow.nncore.tensor import Mode, as_tensor4, check_finite

Gradients = List[Dict[str, np.ndarray]]


@dataclass
class ForwardResult:
    """
    outputs: (n,) head input (one score per sample)
    embedding: (n, 1, 1, F) vectorized feature maps
    """
    outputs: np.ndarray
    embedding: np.ndarray
    mode: Mode
    caches: List[object] = field(default_factory=list)
    running: Dict[int, Dict[str, np.ndarray]] = field(default_factory=dict)


class ResidualNetwork:
    """
    Network = LayerSpec list + NetworkParams + expected input geometry
    """

    def __init__(self, specs: Sequence[LayerSpec], params: NetworkParams,
                 input_size: int, in_channels: int = 3):
        self.specs = list(specs)
        self.params = params
        self.input_size = int(input_size)
        self.in_channels = int(in_channels)

        params.validate(self.specs)
        out_shape = compose_output_shape(self.specs, (1, self.in_channels, self.input_size, self.input_size))
        if out_shape[1:] != (1, 1, 1):
            raise ShapeError(f"Network must end in a single unit, got output shape {out_shape}")

        gap = [i for i, spec in enumerate(self.specs) if spec.kind is LayerKind.GLOBAL_AVG_POOL]
        self._embedding_layer = gap[-1] if gap else len(self.specs) - 2

    @classmethod
    def initialize(cls, specs: Sequence[LayerSpec], seed: int, input_size: int,
                   in_channels: int = 3, *stream) -> "ResidualNetwork":
        """Fresh network with weights drawn from the 'init' substream (extended by `stream`)"""
        params = NetworkParams.initialize(specs, make_rng(seed, "init", *stream))
        return cls(specs, params, input_size, in_channels)

    @property
    def embedding_dim(self) -> int:
        shape = compose_output_shape(self.specs[:self._embedding_layer + 1],
                                     (1, self.in_channels, self.input_size, self.input_size))
        return int(np.prod(shape[1:]))

    def _check_input(self, x: np.ndarray):
        _, c, h, w = x.shape
        if c != self.in_channels or h != self.input_size or w != self.input_size:
            raise ShapeError(
                f"Input must be (n, {self.in_channels}, {self.input_size}, {self.input_size}), "
                f"got {x.shape}", layer=0)

    def forward(self, x, mode: Mode = Mode.EVAL, update_running_stats: bool = True) -> ForwardResult:
        """
        Run every layer in order

        Args:
            x: (n, c, h, w) batch
            mode: Batch statistics (train) or running statistics (eval) in BN layers
            update_running_stats: Apply train-mode running-stat updates to the params

        Raises:
            ShapeError: Input geometry does not fit the network
            NonFiniteError: NaN/Inf at a layer output, naming the layer
        """
        x = as_tensor4(x, layer=0)
        self._check_input(x)

        caches: List[object] = []
        running: Dict[int, Dict[str, np.ndarray]] = {}
        embedding = None
        h = x

        for index, spec in enumerate(self.specs):
            block = self.params[index]
            kind = spec.kind
            if index == len(self.specs) - 1 and embedding is None:
                embedding = h.reshape(h.shape[0], 1, 1, -1)

            if kind is LayerKind.CONV:
                h, cache = layers.conv2d_forward(h, block.arrays["w"], block.arrays.get("b"),
                                                 spec.stride, spec.pad, index)
            elif kind is LayerKind.BATCHNORM:
                h, cache, run = layers.batchnorm_forward(
                    h, block.arrays["gamma"], block.arrays["beta"],
                    block.buffers["running_mean"], block.buffers["running_var"], mode, layer=index)
                if run is not None:
                    running[index] = {"running_mean": run[0], "running_var": run[1]}
            elif kind is LayerKind.RELU:
                h, cache = layers.relu_forward(h)
            elif kind is LayerKind.MAXPOOL:
                h, cache = layers.maxpool2_forward(h, index)
            elif kind is LayerKind.RESIDUAL_BLOCK:
                h, cache, run = residual_block_forward(h, block, spec, mode, index)
                if run:
                    running[index] = run
            elif kind is LayerKind.GLOBAL_AVG_POOL:
                h, cache = layers.global_avg_pool_forward(h)
            elif kind is LayerKind.DENSE:
                h, cache = layers.dense_forward(h, block.arrays["w"], block.arrays["b"], index)
            else:
                raise ShapeError(f"Unknown layer kind {kind}", layer=index)

            check_finite(h, layer=index)
            caches.append(cache)
            if index == self._embedding_layer:
                embedding = h.reshape(h.shape[0], 1, 1, -1)

        if update_running_stats:
            self.apply_running_stats(running)

        return ForwardResult(outputs=h.reshape(-1), embedding=embedding, mode=mode,
                             caches=caches, running=running)

    def apply_running_stats(self, running: Dict[int, Dict[str, np.ndarray]]):
        for index, updates in running.items():
            for name, value in updates.items():
                self.params[index].buffers[name] = value

    def backward(self, doutputs: np.ndarray, result: ForwardResult) -> Tuple[Gradients, np.ndarray]:
        """
        Backpropagate d(loss)/d(outputs)

        Returns:
            (per-layer gradient dicts keyed like the trainable arrays, d(loss)/d(input))
        """
        n = result.outputs.shape[0]
        dh = np.asarray(doutputs, dtype=np.float64).reshape(n, 1, 1, 1)
        grads: Gradients = [dict() for _ in self.specs]

        for index in range(len(self.specs) - 1, -1, -1):
            kind = self.specs[index].kind
            cache = result.caches[index]
            if kind is LayerKind.CONV:
                dh, dw, db = layers.conv2d_backward(dh, cache)
                grads[index]["w"] = dw
                if db is not None:
                    grads[index]["b"] = db
            elif kind is LayerKind.BATCHNORM:
                dh, grads[index]["gamma"], grads[index]["beta"] = layers.batchnorm_backward(dh, cache)
            elif kind is LayerKind.RELU:
                dh = layers.relu_backward(dh, cache)
            elif kind is LayerKind.MAXPOOL:
                dh = layers.maxpool2_backward(dh, cache)
            elif kind is LayerKind.RESIDUAL_BLOCK:
                dh, grads[index] = residual_block_backward(dh, cache)
            elif kind is LayerKind.GLOBAL_AVG_POOL:
                dh = layers.global_avg_pool_backward(dh, cache)
            elif kind is LayerKind.DENSE:
                dh, grads[index]["w"], grads[index]["b"] = layers.dense_backward(dh, cache)

        return grads, dh

    def predict(self, x) -> ForwardResult:
        """
        Eval-mode forward, one sample per pass (no caches kept)

        Every output depends on its own sample only, so results are
        bit-identical under any batching or ordering of the inputs.
        """
        x = as_tensor4(x, layer=0)
        if x.shape[0] <= 1:
            result = self.forward(x, Mode.EVAL, update_running_stats=False)
            result.caches = []
            return result
        parts = [self.forward(x[i:i + 1], Mode.EVAL, update_running_stats=False)
                 for i in range(x.shape[0])]
        return ForwardResult(
            outputs=np.concatenate([p.outputs for p in parts]),
            embedding=np.concatenate([p.embedding for p in parts]),
            mode=Mode.EVAL,
        )
