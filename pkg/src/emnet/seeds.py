"""Deterministic seed derivation.

Every random stream in a run is derived from one master seed by hashing the
master seed together with a purpose label and integer coordinates::

    sha256("<master>:<purpose>:<i0>:<i1>...")[:8]  ->  uint64

The same (master, purpose, coords) always yields the same stream, so runs are
reproducible and independent purposes never share state.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, purpose: str, *coords: int) -> int:
    if not purpose:
        raise ValueError("purpose must be non-empty")
    text = ":".join([str(int(master)), purpose, *(str(int(c)) for c in coords)])
    digest = hashlib.sha256(text.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big", signed=False)


def rng_for(master: int, purpose: str, *coords: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, purpose, *coords))
