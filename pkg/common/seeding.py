from typing import Union

import numpy as np

# Stream identifiers keep independent consumers of one seed apart.
STREAM_ACQUISITION = 1
STREAM_MAP_FIT = 2
STREAM_SURFACE = 3
STREAM_OBSERVATION = 4
STREAM_PLANT = 5
STREAM_MASK = 6


def generator(*entropy: Union[int, np.integer]) -> np.random.Generator:
    """Build a generator from a tuple of non-negative integers.

    The same tuple always yields the same stream, in any process.
    """
    words = [int(e) for e in entropy]
    if any(w < 0 for w in words):
        raise ValueError(f"seed entropy must be non-negative, got {words}")
    return np.random.default_rng(np.random.SeedSequence(words))


def derive(*entropy: Union[int, np.integer]) -> int:
    """Collapse an entropy tuple into one 32-bit seed for components that take a plain int."""
    words = [int(e) for e in entropy]
    return int(np.random.SeedSequence(words).generate_state(1)[0])
