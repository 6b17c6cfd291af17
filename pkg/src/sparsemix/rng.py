"""Counter-based random streams.

Every stream is a Philox generator whose 128-bit key is a hash of
``(seed, tag, *index)``. Draws therefore depend only on that triple and never on
the order in which streams are created, which is what lets sweeps run on any
number of workers and still produce identical output.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _digest(seed: int, tag: str, index: tuple, size: int) -> int:
    payload = repr((int(seed), str(tag), tuple(_plain(i) for i in index))).encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=size).digest(), "little")


def _plain(value):
    # numpy scalars repr differently across versions; normalise them
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value).hex()
    return value


def stream(seed: int, tag: str, *index) -> np.random.Generator:
    """Independent generator for ``(seed, tag, index)``."""
    return np.random.Generator(np.random.Philox(key=_digest(seed, tag, index, 16)))


def derive_seed(seed: int, tag: str, *index) -> int:
    """A 63-bit child seed, stable across platforms and Python versions."""
    return _digest(seed, tag, index, 8) >> 1
