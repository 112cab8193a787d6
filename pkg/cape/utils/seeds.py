"""Deterministic random streams.

Every random draw in the package comes from a ``numpy.random.Generator``
derived from an integer seed plus a tuple of stream keys, so that runs are a
pure function of their configuration and seed.
"""

from typing import Any

import numpy as np


def derive_seed(seed: int, *keys: int) -> np.random.SeedSequence:
    """Build a seed sequence for a named sub-stream.

    Args:
        seed: The base seed.
        keys: Nonnegative integers identifying the sub-stream.

    Returns:
        A seed sequence independent of every other key tuple.
    """
    return np.random.SeedSequence([int(seed), *(int(k) for k in keys)])


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Create a generator for ``(seed, *keys)``."""
    return np.random.default_rng(derive_seed(seed, *keys))


def rng_state(rng: np.random.Generator) -> dict[str, Any]:
    """JSON-serializable snapshot of a generator's bit-generator state."""
    return dict(rng.bit_generator.state)


def restore_rng(state: dict[str, Any]) -> np.random.Generator:
    """Rebuild a generator from ``rng_state`` output."""
    rng = np.random.default_rng()
    rng.bit_generator.state = state
    return rng


# Stream keys
STREAM_INIT = 1
STREAM_DATA_ORDER = 2
STREAM_NOISE = 3
STREAM_SCENE = 4
