"""Counter-style seeding so every replicate owns an independent, reproducible stream.

A stream is identified by a master seed plus a path of non-negative integers
(e.g. ``(replication, origin, replicate)``).  The generator for a path depends
only on the path, never on the order in which paths are visited, which keeps
results identical under any parallel schedule.
"""

import numpy as np


def _sequence(seed, path):
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(part) for part in path))


def stream(seed, *path):
    """Return a ``numpy.random.Generator`` for ``(seed, *path)``."""
    return np.random.Generator(np.random.PCG64(_sequence(seed, path)))


def derive_seed(seed, *path):
    """Derive a 64-bit integer seed for a sub-task identified by ``path``."""
    state = _sequence(seed, path).generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)
