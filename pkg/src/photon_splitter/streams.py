"""Counter-based, splittable random streams.

A master seed expands into independent streams addressed by an integer key path:
``stream(seed, i, j)`` hashes ``(seed, i, j)`` through :class:`numpy.random.SeedSequence`
into the key of a Philox counter-based generator. Streams depend only on their
address, never on the order in which they are created, so work split over threads
reproduces the single-threaded result exactly.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

MAX_SEED = 2**64 - 1


def stream(seed, *key):
    """Independent generator for address ``key`` under master ``seed``."""
    if not 0 <= int(seed) <= MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def chunk_sizes(total, chunk):
    """Split ``total`` into fixed-size pieces; the split never depends on thread count."""
    full, rest = divmod(int(total), int(chunk))
    return [chunk] * full + ([rest] if rest else [])


def parallel_map(fn, items, threads=1):
    """Ordered map over ``items`` using up to ``threads`` workers."""
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(fn, items))
