"""
Ordered parallel map for independent sweep members.
"""

from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

from src.core.config import get_settings

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(
    fn: Callable[[T], R],
    items: Iterable[T],
    max_workers: int | None = None,
) -> list[R]:
    """
    Apply fn to every item on a thread pool.

    Results come back in input order, so reports built from them are
    deterministic regardless of completion order. The first exception
    raised by a member propagates.
    """
    items = list(items)
    workers = max_workers or get_settings().max_workers
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
