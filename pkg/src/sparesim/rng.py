"""Named, splittable random streams.

Every stream is a pure function of ``(master seed, *keys)``, so draws for one
item or purpose never depend on how many draws another consumer made.
"""

from __future__ import annotations

import hashlib

import numpy as np

# fixed purpose keys
DEMAND = 1
LEAD_TIME = 2
SYNTH = 3
OPTIMIZE = 4
CURVE = 5

_U64 = (1 << 64) - 1


def key_int(key) -> int:
    """Map a stream key (int or str) to a stable 64-bit integer."""
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"stream keys must be nonnegative, got {key}")
        return int(key)
    digest = hashlib.blake2b(str(key).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(seed: int, *keys) -> int:
    """Child seed for ``keys`` under ``seed`` (64-bit, deterministic)."""
    ss = np.random.SeedSequence(entropy=int(seed) & _U64, spawn_key=tuple(key_int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def stream(seed: int, *keys) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & _U64, spawn_key=tuple(key_int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))
