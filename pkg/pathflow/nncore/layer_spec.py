# -*- coding: utf-8 -*-
"""
pathflow/nncore/layer_spec.py
Declarative layer list for the residual network family and its shape algebra.
"""

from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Dict, List, Sequence, Tuple, Union

from pathflow.core.exceptions import ConfigurationError, ShapeError
from pathflow.nncore.layers import conv_output_size

Shape4 = Tuple[int, int, int, int]


class LayerKind(Enum):
    CONV = "conv"
    BATCHNORM = "batchnorm"
    RELU = "relu"
    MAXPOOL = "maxpool"
    RESIDUAL_BLOCK = "residual_block"
    GLOBAL_AVG_POOL = "global_avg_pool"
    DENSE = "dense"


@dataclass(frozen=True)
class LayerSpec:
    """
    One layer of the network.
    in_channels/out_channels: conv and residual blocks; in_channels alone for batchnorm;
    in_channels (flattened features) and units for dense. padding may be "same" (odd kernels).
    """
    kind: LayerKind
    in_channels: int = 0
    out_channels: int = 0
    kernel: int = 3
    stride: int = 1
    padding: Union[int, str] = 0
    units: int = 0
    bias: bool = True

    def __post_init__(self):
        if self.kind in (LayerKind.CONV, LayerKind.RESIDUAL_BLOCK):
            if self.in_channels < 1 or self.out_channels < 1:
                raise ConfigurationError(f"{self.kind.value} layer needs positive channel counts")
            if self.stride < 1:
                raise ConfigurationError(f"{self.kind.value} stride must be >= 1, got {self.stride}")
        if self.kind is LayerKind.CONV:
            if self.kernel < 1:
                raise ConfigurationError(f"Kernel size must be >= 1, got {self.kernel}")
            if self.padding == "same" and self.kernel % 2 == 0:
                raise ConfigurationError(f"'same' padding needs an odd kernel, got {self.kernel}")
            if self.padding != "same" and (not isinstance(self.padding, int) or self.padding < 0):
                raise ConfigurationError(f"Padding must be 'same' or a nonnegative int, got {self.padding}")
        if self.kind is LayerKind.BATCHNORM and self.in_channels < 1:
            raise ConfigurationError("Batch norm layer needs a positive channel count")
        if self.kind is LayerKind.DENSE and (self.in_channels < 1 or self.units < 1):
            raise ConfigurationError("Dense layer needs positive in_channels and units")

    @property
    def pad(self) -> int:
        return self.kernel // 2 if self.padding == "same" else int(self.padding)

    @property
    def needs_projection(self) -> bool:
        return self.kind is LayerKind.RESIDUAL_BLOCK and (
            self.stride > 1 or self.in_channels != self.out_channels
        )

    def output_shape(self, shape: Shape4, layer: int = None) -> Shape4:
        """
        Output shape for an input shape

        Raises:
            ShapeError: The input does not fit this layer
        """
        n, c, h, w = shape
        kind = self.kind
        if kind in (LayerKind.CONV, LayerKind.RESIDUAL_BLOCK, LayerKind.BATCHNORM) and c != self.in_channels:
            raise ShapeError(f"{kind.value} expects {self.in_channels} channels, got {c}", layer=layer)

        if kind is LayerKind.CONV:
            out = (conv_output_size(h, self.kernel, self.stride, self.pad),
                   conv_output_size(w, self.kernel, self.stride, self.pad))
            if min(out) < 1:
                raise ShapeError(f"Kernel {self.kernel} does not fit input {h}x{w}", layer=layer)
            return (n, self.out_channels) + out
        if kind in (LayerKind.BATCHNORM, LayerKind.RELU):
            return shape
        if kind is LayerKind.MAXPOOL:
            if h % 2 or w % 2:
                raise ShapeError(f"Max pooling needs even spatial dims, got {h}x{w}", layer=layer)
            return (n, c, h // 2, w // 2)
        if kind is LayerKind.RESIDUAL_BLOCK:
            return (n, self.out_channels,
                    conv_output_size(h, 3, self.stride, 1), conv_output_size(w, 3, self.stride, 1))
        if kind is LayerKind.GLOBAL_AVG_POOL:
            return (n, c, 1, 1)
        if kind is LayerKind.DENSE:
            if c * h * w != self.in_channels:
                raise ShapeError(f"Dense layer expects {self.in_channels} features, got {c * h * w}",
                                 layer=layer)
            return (n, self.units, 1, 1)
        raise ShapeError(f"Unknown layer kind {kind}", layer=layer)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["kind"] = self.kind.value
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LayerSpec":
        values = dict(data)
        values["kind"] = LayerKind(values["kind"])
        return cls(**values)


def compose_output_shape(specs: Sequence[LayerSpec], shape: Shape4) -> Shape4:
    """Shape after running every layer in order"""
    for index, spec in enumerate(specs):
        shape = spec.output_shape(shape, layer=index)
    return shape


def conv(in_channels: int, out_channels: int, kernel: int = 3, stride: int = 1,
         padding: Union[int, str] = "same", bias: bool = True) -> LayerSpec:
    return LayerSpec(LayerKind.CONV, in_channels, out_channels, kernel, stride, padding, bias=bias)


def default_architecture(in_channels: int = 3, stem_channels: int = 16,
                         stage_widths: Sequence[int] = (16, 32, 64), blocks_per_stage: int = 2,
                         hidden_units: Sequence[int] = ()) -> List[LayerSpec]:
    """
    Stem conv 3x3 + BN + ReLU, one 2x2 max pool, residual stages (stride-2
    projection entering every stage after the first), global average pool,
    optional hidden dense layers and a single-unit output.
    """
    if blocks_per_stage < 1 or not stage_widths:
        raise ConfigurationError("Network needs at least one stage with one block")

    specs = [
        conv(in_channels, stem_channels, 3, 1, "same", bias=False),
        LayerSpec(LayerKind.BATCHNORM, in_channels=stem_channels),
        LayerSpec(LayerKind.RELU),
        LayerSpec(LayerKind.MAXPOOL),
    ]
    channels = stem_channels
    for stage, width in enumerate(stage_widths):
        for block in range(blocks_per_stage):
            stride = 2 if block == 0 and stage > 0 else 1
            specs.append(LayerSpec(LayerKind.RESIDUAL_BLOCK, channels, width, stride=stride))
            channels = width
    specs.append(LayerSpec(LayerKind.GLOBAL_AVG_POOL))
    for units in hidden_units:
        specs.append(LayerSpec(LayerKind.DENSE, in_channels=channels, units=int(units)))
        specs.append(LayerSpec(LayerKind.RELU))
        channels = int(units)
    specs.append(LayerSpec(LayerKind.DENSE, in_channels=channels, units=1))
    return specs
