"""Random streams.

Every random quantity in the package is drawn from a PCG64 generator keyed
by ``(master seed, trial index, purpose)`` through ``SeedSequence`` spawn
keys; PCG64 supports jump-ahead via ``advance``.  Kernels only ever consume
uniform doubles in ``[0, 1)`` (an integer in ``range(k)`` is
``floor(u * k)``).  Numba-compiled ``Generator.random()`` calls the same
``next_double`` as numpy and ``Generator.random(size)`` is independent of
how draws are chunked, so the numba kernels, the numpy kernels and the
reference step functions all see the same numbers.
"""

from __future__ import annotations

import numpy as np

PURPOSES = {
    "dest": 1,  # destination of the ball leaving each non-empty bin
    "select": 2,  # RANDOM strategy ball choice
    "tetris": 3,  # Tetris arrivals (free arrivals when coupled)
    "fault": 4,
    "init": 5,  # random initial configurations
    "batch": 6,  # batched small-instance kernels
}


def make_generator(seed: int, trial: int = 0, purpose: str = "dest") -> np.random.Generator:
    if purpose not in PURPOSES:
        raise ValueError(f"unknown stream purpose {purpose!r}")
    if seed < 0 or trial < 0:
        raise ValueError("seed and trial must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(trial), PURPOSES[purpose]))
    return np.random.Generator(np.random.PCG64(ss))


def uniform_index(u, k):
    """Map uniforms in [0, 1) to integers in range(k)."""
    r = (np.asarray(u) * k).astype(np.int64)
    return np.minimum(r, np.asarray(k) - 1)
