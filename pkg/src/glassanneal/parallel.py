"""Data-parallel helpers with order-preserving reduction.

Work is split into chunks whose random streams depend only on the chunk
index, so any thread count produces the same bits.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "GLASS_ANNEAL_THREADS"


def max_workers() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def ordered_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """``[fn(x) for x in items]``, possibly on a thread pool; result order is input order."""
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def derive_seed(root: int, component: str) -> int:
    """64-bit seed for a named component, derived by hashing ``(component, root)``."""
    digest = hashlib.sha256(f"{component}:{int(root)}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def philox(seed: int | np.random.SeedSequence) -> np.random.Generator:
    """Counter-based generator; the only RNG constructor used in the package."""
    return np.random.Generator(np.random.Philox(seed))
