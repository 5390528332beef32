# -*- coding: utf-8 -*-
"""
pathflow/dataio/patch_cache.py
PatchSet cache file (little-endian):
magic 'PFPS' | u32 version=1 | u32 n | u32 p | n fp32 CHW planes | n (u32 x, u32 y) | u8 flag
"""

import struct
from pathlib import Path

import numpy as np

from pathflow.core.exceptions import OutputPathError, PatchCacheError
from pathflow.dataio.patches import PatchSet

MAGIC = b"PFPS"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


def encode_patch_set(patch_set: PatchSet) -> bytes:
    n, channels, p, _ = patch_set.patches.shape
    if channels != 3:
        raise PatchCacheError(f"PatchSet must have 3 channels, got {channels}")
    return b"".join([
        _HEADER.pack(MAGIC, VERSION, n, p),
        patch_set.patches.astype("<f4").tobytes(),
        patch_set.origins.astype("<u4").tobytes(),
        struct.pack("<B", 1 if patch_set.with_replacement else 0),
    ])


def decode_patch_set(payload: bytes, slide_id: str = "") -> PatchSet:
    if len(payload) < _HEADER.size:
        raise PatchCacheError("Patch cache shorter than its header", {"slide_id": slide_id})
    magic, version, n, p = _HEADER.unpack_from(payload, 0)
    if magic != MAGIC:
        raise PatchCacheError(f"Bad patch cache magic {magic!r}", {"slide_id": slide_id})
    if version != VERSION:
        raise PatchCacheError(f"Unsupported patch cache version {version}", {"slide_id": slide_id})

    plane_bytes = n * 3 * p * p * 4
    origin_bytes = n * 2 * 4
    expected = _HEADER.size + plane_bytes + origin_bytes + 1
    if len(payload) != expected:
        raise PatchCacheError(
            "Patch cache length mismatch",
            {"slide_id": slide_id, "expected": expected, "found": len(payload)}
        )

    offset = _HEADER.size
    planes = np.frombuffer(payload, dtype="<f4", count=n * 3 * p * p, offset=offset)
    offset += plane_bytes
    origins = np.frombuffer(payload, dtype="<u4", count=n * 2, offset=offset)
    offset += origin_bytes
    flag = payload[offset]
    if flag not in (0, 1):
        raise PatchCacheError(f"Bad replacement flag {flag}", {"slide_id": slide_id})

    return PatchSet(
        slide_id=slide_id,
        patches=planes.reshape(n, 3, p, p).astype(np.float64),
        origins=origins.reshape(n, 2).astype(np.int64),
        with_replacement=bool(flag),
    )


def write_patch_set(patch_set: PatchSet, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_patch_set(patch_set))
    except OSError as e:
        raise OutputPathError(f"Cannot write patch cache {path}: {e}")
    return path


def read_patch_set(path, slide_id: str = "") -> PatchSet:
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise PatchCacheError(f"Cannot read patch cache {path}: {e}", {"slide_id": slide_id})
    return decode_patch_set(payload, slide_id=slide_id)
