"""Ordered fan-out over a process pool.

Work is split into contiguous chunks and results come back in chunk order,
so callers see the same output for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def chunks(items: Sequence[T], n: int) -> list[Sequence[T]]:
    n = max(1, min(n, len(items)))
    size, extra = divmod(len(items), n)
    out, start = [], 0
    for i in range(n):
        end = start + size + (1 if i < extra else 0)
        out.append(items[start:end])
        start = end
    return out


def map_chunks(fn: Callable[[Sequence[T]], R], items: Sequence[T], workers: int = 1) -> list[R]:
    """Apply ``fn`` to each of ``workers`` contiguous chunks of ``items``.

    ``fn`` must be picklable (module-level function or ``functools.partial``)
    when ``workers > 1``.
    """
    if workers <= 1 or len(items) <= 1:
        return [fn(items)]
    parts = chunks(items, workers)
    with ProcessPoolExecutor(max_workers=len(parts)) as pool:
        return list(pool.map(fn, parts))
