"""Named, seed-derived random streams.

Every benchmark cell derives independent generators from its key and a
stream name, so results do not depend on execution order or parallelism.
"""

from __future__ import annotations

import zlib

import numpy as np


def _token(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    return zlib.crc32(str(part).encode("utf-8"))


def substream(seed: int, *names) -> np.random.Generator:
    """Generator for ``(seed, *names)``; identical keys give identical streams."""
    return np.random.default_rng(np.random.SeedSequence([_token(seed), *map(_token, names)]))
