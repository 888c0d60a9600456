"""Deterministic, splittable random streams.

Streams are backed by numpy's Philox bit generator, a counter-based
generator with a published algorithm, so a given (seed, tags) pair yields
the same draw sequence on every platform and run. Independent streams are
derived by hashing the seed together with string/int tags, which makes the
draw order independent of call order elsewhere in the program.
"""

from __future__ import annotations

import hashlib

import numpy as np


class Rng:
    """Root of a family of named deterministic streams."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def stream(self, *tags) -> np.random.Generator:
        """A fresh generator keyed by (seed, *tags)."""
        material = repr((self.seed,) + tags).encode("utf-8")
        digest = hashlib.sha256(material).digest()
        # first 128 bits of the hash become the Philox key; fixed
        # little-endian layout keeps the key platform-independent
        key = np.frombuffer(digest[:16], dtype="<u8")
        return np.random.Generator(np.random.Philox(key=key))
