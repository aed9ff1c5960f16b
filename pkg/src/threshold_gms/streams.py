"""Deterministic random-stream construction.

Every replication draws from its own counter-based generator derived
from (base_seed, replication_index, salt).  Streams built this way are
independent of scheduling, so concurrent runs reproduce serial runs
bit for bit.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def replication_rng(base_seed: int, index: int = 0, salt: int = 0) -> np.random.Generator:
    """Generator for one replication.

    The 128-bit Philox key mixes the seed with the task salt; the
    replication index lands in the top counter word, which spaces
    replications 2**192 draws apart, far beyond any single run.
    """
    if index < 0:
        raise ValueError("replication index must be non-negative")
    key = [
        int(base_seed) & _MASK64,
        ((int(base_seed) >> 64) ^ int(salt)) & _MASK64,
    ]
    counter = [0, 0, 0, int(index) & _MASK64]
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def open_uniform(rng: np.random.Generator) -> float:
    """Uniform draw from the open interval (0, 1).

    numpy's ``random()`` includes 0.0; redrawing keeps inverse-survival
    sampling away from the infinite quantile.
    """
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    return float(u)
