"""
Named random streams derived from one top-level seed.

stream(seed, "noise", k) is independent of stream(seed, "mc", k), so adding a
consumer never shifts the draws of another.
"""

import zlib
from typing import Union

import numpy as np

Name = Union[str, int]


def _key(name: Name) -> int:
    if isinstance(name, (int, np.integer)):
        return int(name)
    return zlib.crc32(str(name).encode("utf-8"))


def stream(seed: int, *names: Name) -> np.random.Generator:
    """Generator for the stream addressed by (seed, *names)."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(n) for n in names))
    return np.random.default_rng(seq)


def child_seed(seed: int, *names: Name) -> int:
    """Integer seed for a sub-experiment, e.g. run r of a comparison."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(n) for n in names))
    return int(seq.generate_state(1, dtype=np.uint32)[0])
