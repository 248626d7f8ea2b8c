"""
Replication chunking over a process pool.

Work is split into contiguous index ranges. Each range is run by a
module-level function `fn(start, stop, *args)` that returns a list with one
entry per index; results are reassembled in index order, so the output never
depends on the number of workers or on completion order.
"""

import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Any, Callable, List, Tuple

logger = logging.getLogger(__name__)


def chunk_ranges(n: int, workers: int, min_chunk: int = 16) -> List[Tuple[int, int]]:
    """Contiguous [start, stop) ranges covering 0..n, about four per worker."""
    if n <= 0:
        return []
    size = max(min_chunk, -(-n // max(1, 4 * workers)))
    return [(start, min(start + size, n)) for start in range(0, n, size)]


def run_indexed(fn: Callable[..., List[Any]], n: int, workers: int, *args) -> List[Any]:
    """Evaluate fn over 0..n in chunks and return the per-index results in order."""
    ranges = chunk_ranges(n, workers)
    if workers <= 1 or len(ranges) <= 1:
        out: List[Any] = []
        for start, stop in ranges:
            out.extend(fn(start, stop, *args))
        return out

    by_start = {}
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(fn, start, stop, *args): start for start, stop in ranges}
        for future in as_completed(futures):
            by_start[futures[future]] = future.result()
    logger.debug(f"Collected {len(ranges)} chunks from {workers} workers")
    out = []
    for start, _ in ranges:
        out.extend(by_start[start])
    return out
