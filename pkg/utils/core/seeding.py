"""
Seed management

All randomness in a run derives from one 64-bit root seed. Streams are
addressed by a key path (e.g. ``("train", 3)``) so that adding a stream
never changes the numbers drawn by another one.
"""

import hashlib
from typing import Union

import numpy as np

StreamKey = Union[int, str]


def _key_to_int(key: StreamKey) -> int:
    if isinstance(key, int):
        if key < 0:
            raise ValueError(f"Stream keys must be non-negative, got {key}")
        return key
    # Stable across interpreter runs, unlike hash()
    return int.from_bytes(hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest(), "little")


def seed_sequence(root_seed: int, *keys: StreamKey) -> np.random.SeedSequence:
    """Return the SeedSequence for a key path below ``root_seed``."""
    return np.random.SeedSequence(
        entropy=int(root_seed) & 0xFFFFFFFFFFFFFFFF,
        spawn_key=tuple(_key_to_int(k) for k in keys),
    )


def make_rng(root_seed: int, *keys: StreamKey) -> np.random.Generator:
    """Create an independent generator for the given key path."""
    return np.random.default_rng(seed_sequence(root_seed, *keys))
