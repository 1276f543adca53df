"""Seeded random streams.

All randomness comes from numpy's PCG64 bit generator. Independent substreams
are derived with ``SeedSequence(seed, spawn_key=key)``, so a stream is a pure
function of ``(seed, key)`` and does not depend on how many draws other
streams consumed. Keys used by the package:

* ``(0,)``                       network initialisation
* ``(1, epoch)``                 row shuffling for one epoch
* ``(2, epoch, batch)``          noise for one batch; copies spawn children
* ``(3,)``                       train/test partition
"""

from __future__ import annotations

import numpy as np

INIT = 0
SHUFFLE = 1
NOISE = 2
SPLIT = 3


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for substream ``key`` of ``seed``."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
