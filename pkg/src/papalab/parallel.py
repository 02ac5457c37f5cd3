"""Ordered fan-out of replica chunks over a process pool."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, TypeVar

T = TypeVar("T")


def map_ordered(func: Callable[..., T], chunks: Iterable, workers: int = 1) -> List[T]:
    """Apply ``func`` to every chunk and return results in chunk order.

    Randomness lives in the chunk contents (replica indices), never in the
    worker, so the output does not depend on ``workers``.
    """
    chunks = list(chunks)
    if workers <= 1 or len(chunks) <= 1:
        return [func(c) for c in chunks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, chunks))
