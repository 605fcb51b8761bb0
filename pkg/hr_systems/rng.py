"""Counter-based random streams.

Every random draw in the package comes from a Philox generator keyed by the
run seed plus a tuple of integers (purpose, cycle, step, chunk ...). Streams
never depend on how work is split across threads.
"""
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar, Union

import numpy as np

CHUNK_SIZE = 8192

Key = Union[int, str]
R = TypeVar('R')


def _as_int(key: Key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode('utf-8'))
    if int(key) < 0:
        raise ValueError(f"stream keys must be non-negative, got {key}")
    return int(key)


def stream(seed: int, *keys: Key) -> np.random.Generator:
    """Independent generator for (seed, *keys)."""
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(_as_int(k) for k in keys))
    return np.random.Generator(np.random.Philox(sequence))


def chunk_bounds(total: int, chunk_size: int = CHUNK_SIZE) -> List[range]:
    return [range(start, min(start + chunk_size, total)) for start in range(0, total, chunk_size)]


def parallel_map(func: Callable[..., R], items: Iterable, threads: int = 1) -> List[R]:
    """Ordered map; ``threads`` only changes wall-clock time."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))
