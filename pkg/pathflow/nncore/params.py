"""
Parameter storage aligned to a LayerSpec list
Trainable arrays and batch-norm running statistics live in separate dicts per layer
"""

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np

from pathflow.core.exceptions import ShapeError
from pathflow.nncore.layer_spec import LayerKind, LayerSpec
from pathflow.nncore.layers import init_conv_weight, init_dense_weight
from pathflow.nncore.tensor import DTYPE

ShapeMap = Dict[str, Tuple[int, ...]]


@dataclass
class ParamBlock:
    """Parameters of one layer; `buffers` holds running stats that SGD never touches"""
    arrays: Dict[str, np.ndarray] = field(default_factory=dict)
    buffers: Dict[str, np.ndarray] = field(default_factory=dict)

    def copy(self) -> "ParamBlock":
        return ParamBlock(
            arrays={k: v.copy() for k, v in self.arrays.items()},
            buffers={k: v.copy() for k, v in self.buffers.items()},
        )


def _bn_shapes(prefix: str, channels: int) -> Tuple[ShapeMap, ShapeMap]:
    return ({f"{prefix}gamma": (channels,), f"{prefix}beta": (channels,)},
            {f"{prefix}running_mean": (channels,), f"{prefix}running_var": (channels,)})


def expected_shapes(spec: LayerSpec) -> Tuple[ShapeMap, ShapeMap]:
    """(trainable shapes, buffer shapes) for one layer, in storage order"""
    kind = spec.kind
    if kind is LayerKind.CONV:
        arrays = {"w": (spec.out_channels, spec.in_channels, spec.kernel, spec.kernel)}
        if spec.bias:
            arrays["b"] = (spec.out_channels,)
        return arrays, {}
    if kind is LayerKind.BATCHNORM:
        return _bn_shapes("", spec.in_channels)
    if kind is LayerKind.DENSE:
        return {"w": (spec.in_channels, spec.units), "b": (spec.units,)}, {}
    if kind is LayerKind.RESIDUAL_BLOCK:
        cin, cout = spec.in_channels, spec.out_channels
        bn1, run1 = _bn_shapes("bn1.", cout)
        bn2, run2 = _bn_shapes("bn2.", cout)
        arrays = {"conv1.w": (cout, cin, 3, 3), **bn1, "conv2.w": (cout, cout, 3, 3), **bn2}
        if spec.needs_projection:
            arrays["proj.w"] = (cout, cin, 1, 1)
            arrays["proj.b"] = (cout,)
        return arrays, {**run1, **run2}
    return {}, {}


def _init_array(name: str, shape: Tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    leaf = name.rsplit(".", 1)[-1]
    if leaf == "w":
        if len(shape) == 4:
            return init_conv_weight(rng, shape[0], shape[1], shape[2])
        return init_dense_weight(rng, shape[0], shape[1])
    if leaf in ("gamma", "running_var"):
        return np.ones(shape, dtype=DTYPE)
    return np.zeros(shape, dtype=DTYPE)


class NetworkParams:
    """Ordered parameter blocks, one per LayerSpec"""

    def __init__(self, blocks: List[ParamBlock]):
        self.blocks = blocks

    @classmethod
    def initialize(cls, specs: Sequence[LayerSpec], rng: np.random.Generator) -> "NetworkParams":
        """Glorot-uniform weights, zero biases, unit BN scale; draws follow layer order"""
        blocks = []
        for spec in specs:
            arrays, buffers = expected_shapes(spec)
            blocks.append(ParamBlock(
                arrays={name: _init_array(name, shape, rng) for name, shape in arrays.items()},
                buffers={name: _init_array(name, shape, rng) for name, shape in buffers.items()},
            ))
        return cls(blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    def __getitem__(self, index: int) -> ParamBlock:
        return self.blocks[index]

    def copy(self) -> "NetworkParams":
        return NetworkParams([block.copy() for block in self.blocks])

    def named_arrays(self) -> Iterator[Tuple[int, str, np.ndarray]]:
        for index, block in enumerate(self.blocks):
            for name, array in block.arrays.items():
                yield index, name, array

    def named_buffers(self) -> Iterator[Tuple[int, str, np.ndarray]]:
        for index, block in enumerate(self.blocks):
            for name, array in block.buffers.items():
                yield index, name, array

    @property
    def num_parameters(self) -> int:
        return int(sum(array.size for _, _, array in self.named_arrays()))

    def zeros_like(self) -> List[Dict[str, np.ndarray]]:
        return [{name: np.zeros_like(a) for name, a in block.arrays.items()} for block in self.blocks]

    def validate(self, specs: Sequence[LayerSpec]):
        """
        Check block count, names and shapes against the specs

        Raises:
            ShapeError: A block does not match its layer
        """
        if len(specs) != len(self.blocks):
            raise ShapeError(f"Expected {len(specs)} parameter blocks, got {len(self.blocks)}")
        for index, (spec, block) in enumerate(zip(specs, self.blocks)):
            arrays, buffers = expected_shapes(spec)
            for want, have in ((arrays, block.arrays), (buffers, block.buffers)):
                if list(want) != list(have):
                    raise ShapeError(f"Parameter names {list(have)} do not match {list(want)}",
                                     layer=index)
                for name, shape in want.items():
                    if have[name].shape != shape:
                        raise ShapeError(
                            f"Parameter {name} has shape {have[name].shape}, expected {shape}",
                            layer=index)
            for name, array in block.buffers.items():
                if name.endswith("running_var") and np.any(array < 0):
                    raise ShapeError(f"Negative running variance in {name}", layer=index)
