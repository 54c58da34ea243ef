"""Keyed counter-based random streams.

Every random draw in a simulation comes from a Philox generator whose key is
derived from ``(seed, *key)``. Two streams with different keys are
statistically independent, and a stream's content depends only on its key,
never on which process or in what order it was created.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int | np.random.Generator | None, *key: int) -> np.random.Generator:
    """Return a Philox generator keyed by ``seed`` and the integer ``key`` path.

    Passing an existing ``Generator`` returns it unchanged (``key`` must then
    be empty), which lets low-level helpers accept either form.
    """
    if isinstance(seed, np.random.Generator):
        if key:
            raise ValueError("cannot derive a keyed stream from a Generator")
        return seed
    if seed is None:
        seed = 0
    if seed < 0 or any(k < 0 for k in key):
        raise ValueError("seed and key components must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
