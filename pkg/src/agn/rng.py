"""Seeded random streams.

Every sampling routine takes its own ``numpy.random.Generator`` backed by
PCG64 (O'Neill's permuted congruential generator, 128-bit state, XSL-RR
output), seeded directly from an integer. Streams are therefore reproducible
across machines for a given numpy version.
"""

import numpy as np

RNG_ALGORITHM = "numpy.random.PCG64"


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))
