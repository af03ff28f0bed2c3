"""Stable RNG substream derivation.

Every random decision in the pipeline draws from a substream keyed by
(global seed, stable labels), so output is identical across runs, platforms
and worker schedules. Python's salted hash() must never be used here.
"""

from __future__ import annotations

import hashlib
import random

_SEP = b"\x1f"


def derive_rng(seed: int, *labels: object) -> random.Random:
    """Return a Random seeded from (seed, labels) via a keyed blake2b digest."""
    material = _SEP.join(str(p).encode("utf-8") for p in (seed, *labels))
    digest = hashlib.blake2b(material, digest_size=8).digest()
    return random.Random(int.from_bytes(digest, "big"))
