"""Counter-based random streams keyed by (seed, stage, ...).

Every stochastic stage draws from Philox streams derived from the global
seed plus a stage tag and an index key.  Work that is split into blocks of
``BLOCK`` items uses one stream per block, so running blocks serially or
across workers gives the same numbers.
"""

from enum import IntEnum

import numpy as np

BLOCK = 1024


class Stage(IntEnum):
    MODEFIND = 1
    SEGMENT = 2
    LANGEVIN = 3
    LABELS = 4
    NNET = 5
    BRIDGE = 6
    SAMPLE = 7
    METROPOLIS = 8
    UNIFORM = 9
    GROUND_TRUTH = 10
    METRICS = 11


def stream(seed: int, stage: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stage),) + tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def block_ranges(n: int, size: int = BLOCK):
    """Yield ``(block_index, lo, hi)`` covering ``range(n)``."""
    for b, lo in enumerate(range(0, n, size)):
        yield b, lo, min(lo + size, n)


def blocked_rows(seed, stage, key, start, stop, draw, size=BLOCK):
    """Rows ``[start, stop)`` of a blockwise-generated array.

    ``draw(gen, m)`` must return an array with leading dimension ``m``.  Each
    block is always drawn at full ``size`` so the rows never depend on how
    the index range was partitioned.
    """
    if stop <= start:
        return None
    parts = []
    for b in range(start // size, (stop - 1) // size + 1):
        gen = stream(seed, stage, *key, b)
        rows = draw(gen, size)
        lo = max(start - b * size, 0)
        hi = min(stop - b * size, size)
        parts.append(rows[lo:hi])
    return np.concatenate(parts, axis=0)
