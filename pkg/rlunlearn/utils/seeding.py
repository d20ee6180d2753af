"""Deterministic seed derivation.

Child seeds are derived from the master seed with the SplitMix64 finalizer so
that every (stage, context, ...) path gets its own stream. Adding a context
never perturbs the stream of another one.
"""

import hashlib
from typing import Union

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One SplitMix64 step: add the golden gamma, then finalize."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _tag_value(tag: str) -> int:
    # blake2b is stable across processes, unlike hash()
    return int.from_bytes(hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest(), "little")


def mix(master: int, *path: Union[str, int]) -> int:
    """Derive a 64-bit child seed from ``master`` and a path of tags/ids.

    Example:
        mix(7, "rollout", 12, 3)  # iteration 12, context 3
    """
    h = splitmix64(master & MASK64)
    for part in path:
        value = _tag_value(part) if isinstance(part, str) else int(part) & MASK64
        h = splitmix64(h ^ value)
    return h


def derive_rng(master: int, *path: Union[str, int]) -> np.random.Generator:
    """numpy Generator seeded with :func:`mix`."""
    return np.random.default_rng(mix(master, *path))
