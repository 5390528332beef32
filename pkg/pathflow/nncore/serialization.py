# -*- coding: utf-8 -*-
"""
pathflow/nncore/serialization.py
Model file (little-endian):
magic 'PFNN' | u32 version=1 | u32 header length | UTF-8 JSON header |
fp64 trainable arrays in layer order | fp64 batch-norm running stats in layer order
"""

import json
import struct
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from pathflow.core.exceptions import ModelFileError, OutputPathError, PathflowException
from pathflow.core.logger import get_logger
from pathflow.nncore.layer_spec import LayerSpec
from pathflow.nncore.network import ResidualNetwork
from pathflow.nncore.params import NetworkParams, ParamBlock, expected_shapes

logger = get_logger(__name__)

MAGIC = b"PFNN"
VERSION = 1
_PREFIX = struct.Struct("<4sII")


def encode_model(net: ResidualNetwork, metadata: Optional[Dict[str, Any]] = None) -> bytes:
    header = {
        "input_size": net.input_size,
        "in_channels": net.in_channels,
        "layers": [spec.to_dict() for spec in net.specs],
        "shapes": [
            {"arrays": {k: list(v.shape) for k, v in block.arrays.items()},
             "buffers": {k: list(v.shape) for k, v in block.buffers.items()}}
            for block in net.params.blocks
        ],
        "metadata": metadata or {},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    chunks = [_PREFIX.pack(MAGIC, VERSION, len(header_bytes)), header_bytes]
    chunks += [array.astype("<f8").tobytes() for _, _, array in net.params.named_arrays()]
    chunks += [array.astype("<f8").tobytes() for _, _, array in net.params.named_buffers()]
    return b"".join(chunks)


def decode_model(payload: bytes):
    """
    Parse a model file

    Returns:
        (network, metadata dict)

    Raises:
        ModelFileError: Bad magic/version, malformed header or length mismatch
    """
    if len(payload) < _PREFIX.size:
        raise ModelFileError("Model file shorter than its prefix")
    magic, version, header_len = _PREFIX.unpack_from(payload, 0)
    if magic != MAGIC:
        raise ModelFileError(f"Bad model magic {magic!r}")
    if version != VERSION:
        raise ModelFileError(f"Unsupported model version {version}")

    start = _PREFIX.size
    if len(payload) < start + header_len:
        raise ModelFileError("Model header truncated")
    try:
        header = json.loads(payload[start:start + header_len].decode("utf-8"))
        specs = [LayerSpec.from_dict(entry) for entry in header["layers"]]
        input_size = int(header["input_size"])
        in_channels = int(header["in_channels"])
    except (ValueError, KeyError, TypeError, PathflowException) as e:
        raise ModelFileError(f"Malformed model header: {e}")

    layouts = [expected_shapes(spec) for spec in specs]
    array_count = sum(int(np.prod(s)) for arrays, _ in layouts for s in arrays.values())
    buffer_count = sum(int(np.prod(s)) for _, buffers in layouts for s in buffers.values())
    offset = start + header_len
    expected = offset + 8 * (array_count + buffer_count)
    if len(payload) != expected:
        raise ModelFileError("Model file length mismatch",
                             {"expected": expected, "found": len(payload)})

    values = np.frombuffer(payload, dtype="<f8", offset=offset).astype(np.float64)
    cursor = 0

    def take(shape) -> np.ndarray:
        nonlocal cursor
        size = int(np.prod(shape))
        array = values[cursor:cursor + size].reshape(shape).copy()
        cursor += size
        return array

    blocks = [ParamBlock(arrays={k: take(s) for k, s in arrays.items()}) for arrays, _ in layouts]
    for block, (_, buffers) in zip(blocks, layouts):
        block.buffers = {k: take(s) for k, s in buffers.items()}

    try:
        net = ResidualNetwork(specs, NetworkParams(blocks), input_size, in_channels)
    except PathflowException as e:
        raise ModelFileError(f"Model layers are inconsistent: {e.message}")
    return net, header.get("metadata", {})


def save_model(net: ResidualNetwork, path, metadata: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_model(net, metadata))
    except OSError as e:
        raise OutputPathError(f"Cannot write model file {path}: {e}")
    logger.info(f"[MODEL] saved {net.params.num_parameters} parameters to {path}")
    return path


def load_model(path):
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise ModelFileError(f"Cannot read model file {path}: {e}")
    return decode_model(payload)
