"""Reproducible random number generation.

All randomness in the package flows from a single 64-bit seed through
counter-based Philox generators.  Independent streams (parallel chains,
Monte Carlo replicates) are derived by spawning from one SeedSequence, so
results never depend on scheduling or thread count.
"""

from __future__ import annotations

import secrets

import numpy as np


def derive_seed(seed: int | None = None) -> int:
    """Return ``seed`` if given, otherwise a fresh 64-bit seed."""
    if seed is None:
        return secrets.randbits(63)
    return int(seed)


def make_generator(seed: int) -> np.random.Generator:
    """Create the package-standard generator (Philox) for a seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def spawn_generators(seed: int, n: int) -> list[np.random.Generator]:
    """Split one seed into ``n`` independent generators.

    Streams are statistically independent and reproducible: stream ``i``
    depends only on ``(seed, i)``.
    """
    children = np.random.SeedSequence(int(seed)).spawn(n)
    return [np.random.Generator(np.random.Philox(c)) for c in children]
