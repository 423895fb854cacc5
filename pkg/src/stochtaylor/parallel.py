"""Deterministic chunked execution.

Work is cut into chunks of a fixed size that never depends on the worker
count; results come back in chunk order, so every reduction sees the same
array whatever the pool size.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np

CHUNK = 1024


def chunk_bounds(n: int, chunk: int = CHUNK) -> list[tuple[int, int, int]]:
    """(chunk_index, start, stop) triples covering range(n)."""
    return [(c, lo, min(lo + chunk, n)) for c, lo in enumerate(range(0, n, chunk))]


def chunk_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for (seed, *key) via SeedSequence hashing."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, key)]))


def run_chunks(fn: Callable, tasks: Sequence, workers: int = 1) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))
