"""Seeded random streams.

Every logical stream (a path, a time slice, a round) gets its own generator
derived from the run seed plus integer keys, so results do not depend on the
order in which streams are consumed.
"""

import numpy as np

# stream tags, kept stable so artifacts stay reproducible across versions
PATHS = 1
TIME_SLICE = 2
ROUND = 3
POLICY = 4
FORWARD = 5


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))
