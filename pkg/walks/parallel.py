# walks/parallel.py
"""
Walker chunks on a thread pool. Chunk boundaries depend only on the walker count and
the chunk size, and results come back in chunk order, so the thread count never
changes an answer.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

from django.conf import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")

DEFAULT_CHUNK = 1 << 15


def chunk_ranges(total: int, chunk_size: int = DEFAULT_CHUNK) -> list[tuple[int, int]]:
    if chunk_size < 1:
        raise ValueError("chunk_size must be positive")
    return [(start, min(start + chunk_size, total)) for start in range(0, total, chunk_size)]


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(getattr(settings, "DYADLAB_THREADS", 1))
    return max(1, threads)


def map_chunks(
    fn: Callable[[int, int], T],
    total: int,
    chunk_size: int = DEFAULT_CHUNK,
    threads: int | None = None,
    first: int = 0,
) -> list[T]:
    """Call fn(start, stop) for every chunk of walker indices first .. first+total; results in chunk order."""
    ranges = [(a + first, b + first) for a, b in chunk_ranges(total, chunk_size)]
    threads = resolve_threads(threads)
    logger.debug("%d walkers in %d chunk(s) on %d thread(s)", total, len(ranges), threads)
    if threads == 1 or len(ranges) <= 1:
        return [fn(a, b) for a, b in ranges]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda r: fn(*r), ranges))
