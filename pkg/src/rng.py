"""Seeded, portable random streams.

Every random quantity in the package comes from ``stream(seed, *keys)``. The
keys split one user seed into independent sub-streams (for example one per
scene index), so records can be generated in any order or in parallel and
still match a serial run bit for bit. PCG64 seeded through ``SeedSequence``
produces the same sequence on every platform numpy supports.
"""

import hashlib
from typing import Union

import numpy as np

_MASK63 = (1 << 63) - 1


def _as_entropy(value: Union[int, str]) -> int:
    if isinstance(value, (int, np.integer)):
        value = int(value)
        if value < 0:
            raise ValueError(f"Seeds and stream keys must be non-negative, got {value}")
        return value
    digest = hashlib.blake2b(str(value).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") & _MASK63


def stream(seed: int, *keys: Union[int, str]) -> np.random.Generator:
    """A generator derived from ``seed`` and any number of integer or text keys."""
    entropy = [_as_entropy(seed)] + [_as_entropy(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def unit_hash(*parts: Union[int, str]) -> float:
    """Deterministic value in [0, 1) for a tuple of keys (used for data splits)."""
    text = "\x1f".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.blake2b(text, digest_size=8).digest()
    return int.from_bytes(digest, "little") / 2.0**64
