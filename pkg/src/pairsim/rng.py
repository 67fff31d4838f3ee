"""Reproducible, splittable random streams.

Every stream is a Philox (counter-based) generator keyed by a root seed and a
tuple of integers.  ``stream(seed, r)`` is the stream of replicate ``r``;
streams with different keys are statistically independent and can be
consumed in any order or on any thread.
"""

from __future__ import annotations

import numpy as np

# Domain tags keep streams used for different purposes apart.
REPLICATE = 0
POISSON_PATH = 1
ENSEMBLE_CHUNK = 2
GAUSSIAN = 3
COUPLING = 4


def split(seed: int, *key: int) -> np.random.SeedSequence:
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(split(seed, *key)))
