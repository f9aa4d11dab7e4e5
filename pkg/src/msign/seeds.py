"""Splittable seed derivation: one top-level seed reproduces any run.

Child seeds are derived by hashing the parent seed together with a textual
path, so independent components (authors, rounds, trials) get independent
randomness that never depends on call order.
"""

from __future__ import annotations

import numpy as np

from .crypto import hash0


def _as_bytes(seed: int | bytes | str) -> bytes:
    if isinstance(seed, bytes):
        return seed
    if isinstance(seed, int):
        return seed.to_bytes(8, "little", signed=False)
    return seed.encode("utf-8")


def derive_seed(parent: int | bytes | str, *path: int | str) -> bytes:
    """32-byte child seed for the given path under the parent seed."""
    material = _as_bytes(parent)
    for part in path:
        material = hash0(material + b"/" + _as_bytes(part if isinstance(part, str) else int(part)))
    return hash0(material + b"/leaf")


def derive_rng(parent: int | bytes | str, *path: int | str) -> np.random.Generator:
    """Deterministic numpy generator for the given path."""
    seed = derive_seed(parent, *path)
    return np.random.default_rng(int.from_bytes(seed[:8], "little"))
