"""
Named random substreams
Every random draw in PathFlow flows from one integer seed through these helpers
"""

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def hash64(text: str) -> int:
    """Stable 64-bit hash of a string (sha256 prefix)"""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_seed(seed: int, *names) -> int:
    """
    Derive a substream seed from a root seed and stream names

    Args:
        seed: Root integer seed
        *names: Stream path, e.g. ("shuffle", repeat, epoch)

    Returns:
        64-bit integer seed
    """
    canonical = "|".join([str(int(seed))] + [str(name) for name in names])
    return hash64(canonical)


def slide_seed(seed: int, slide_id: str) -> int:
    """Per-slide seed: seed XOR hash(slide_id)"""
    return (int(seed) & MASK64) ^ hash64(slide_id)


def make_rng(seed: int, *names) -> np.random.Generator:
    """Generator for a named substream (the root seed alone when no names are given)"""
    if names:
        seed = derive_seed(seed, *names)
    return np.random.default_rng(int(seed) & MASK64)
