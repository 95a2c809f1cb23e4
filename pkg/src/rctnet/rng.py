"""Seeded, splittable random streams and deterministic chunked Monte-Carlo.

Every sampler takes an explicit ``numpy.random.Generator``. Monte-Carlo loops
split the replicate range into fixed-size chunks, give each chunk its own child
stream, and concatenate chunk results in chunk order, so the outcome depends on
the seed only, never on how many workers ran the chunks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

T = TypeVar("T")

DEFAULT_CHUNK = 20_000


def make_rng(seed: int | None = None) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def split(rng: np.random.Generator, k: int) -> list[np.random.Generator]:
    return list(rng.spawn(k))


def chunk_sizes(replicates: int, chunk: int = DEFAULT_CHUNK) -> list[int]:
    if replicates < 0:
        raise ValueError("replicates must be non-negative")
    full, rest = divmod(replicates, chunk)
    return [chunk] * full + ([rest] if rest else [])


def map_chunks(
    fn: Callable[[np.random.Generator, int], T],
    rng: np.random.Generator,
    replicates: int,
    *,
    chunk: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> list[T]:
    """Run ``fn(stream, size)`` over replicate chunks; results come back in chunk order."""
    sizes = chunk_sizes(replicates, chunk)
    streams = split(rng, len(sizes))
    if workers <= 1 or len(sizes) <= 1:
        return [fn(s, m) for s, m in zip(streams, sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, streams, sizes))
