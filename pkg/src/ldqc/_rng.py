"""Named, seeded random streams.

Every stochastic step draws from ``rng_stream(seed, label)`` so results do not
depend on call order elsewhere in the program.
"""

from __future__ import annotations

import zlib

import numpy as np


def rng_stream(seed: int, label: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(label.encode())]))
