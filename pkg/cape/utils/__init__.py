"""Utility functions."""

from cape.utils.angles import wrap_angle
from cape.utils.hashing import canonical_json, content_hash
from cape.utils.seeds import derive_seed, make_rng, restore_rng, rng_state

__all__ = [
    "canonical_json",
    "content_hash",
    "derive_seed",
    "make_rng",
    "restore_rng",
    "rng_state",
    "wrap_angle",
]
