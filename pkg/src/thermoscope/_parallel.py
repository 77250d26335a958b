"""Chunked execution whose result never depends on the worker count."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def chunked(n: int, size: int):
    return [(start, min(start + size, n)) for start in range(0, n, size)]


def map_chunks(fn, chunks, workers: int = 1):
    """Apply ``fn`` to every chunk and return the results in chunk order.

    Chunk boundaries are fixed by the caller, so each chunk's arithmetic (and
    hence every reduction) is the same for any number of workers.
    """
    if workers <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))
