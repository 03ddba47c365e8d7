"""Independent, reproducible random streams keyed by (seed, field).

Each sampled quantity (interarrival gaps, sizes, task counts, ...) draws from
its own Philox counter stream, so adding a new field or extra draws in one
field never shifts the values seen by another.
"""

from __future__ import annotations

import numpy as np

FIELDS = {
    "interarrival": 0,
    "size": 1,
    "ntasks": 2,
    "split": 3,
    "np": 4,
    "bootstrap": 5,
    "corpus": 6,
}

_MASK64 = (1 << 64) - 1


def stream(seed: int, field: str | int, *extra: int) -> np.random.Generator:
    """Generator for one (seed, field[, extra...]) key.

    The key is hashed with SeedSequence and fed to a Philox bit generator.
    """
    fid = FIELDS[field] if isinstance(field, str) else int(field)
    words = [int(seed) & _MASK64, fid, *(int(e) & _MASK64 for e in extra)]
    ss = np.random.SeedSequence(words)
    return np.random.Generator(np.random.Philox(ss))


def uniforms(seed: int, field: str | int, n: int, *extra: int) -> np.ndarray:
    """n uniforms in the open interval (0, 1) from the keyed stream."""
    u = stream(seed, field, *extra).random(n)
    # random() is in [0, 1); map exact zeros to the smallest positive double
    return np.where(u > 0.0, u, np.finfo(float).tiny)


def replication_seed(base_seed: int, rep: int) -> int:
    """Seed of replication ``rep``; shared across loads (common random numbers)."""
    return (int(base_seed) + int(rep)) & _MASK64
