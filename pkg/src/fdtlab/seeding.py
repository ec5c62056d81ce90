"""Named sub-seed derivation.

One user-facing seed drives every random consumer. Each consumer asks for
a sub-generator by label, so adding a new consumer never shifts the streams
of existing ones.
"""

import hashlib

import numpy as np


def subseed(seed: int, label: str) -> int:
    """Derive a 64-bit seed from (seed, label) via SHA-256."""
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def rng_for(seed: int, label: str) -> np.random.Generator:
    """Generator dedicated to one named purpose under a master seed."""
    return np.random.default_rng(subseed(seed, label))
