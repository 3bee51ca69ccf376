"""Deterministic shard-and-merge helper.

Work is cut into ``threads`` contiguous shards; results come back in shard
order no matter which worker finishes first.  Worker processes are forked so
large read-only objects passed as ``shared`` are inherited, not pickled.
"""

from __future__ import annotations

import itertools
import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor

_SHARED: dict = {}
_keys = itertools.count()


def shard_bounds(n: int, shards: int) -> list[tuple[int, int]]:
    shards = max(1, min(shards, n)) if n else 1
    edges = [round(k * n / shards) for k in range(shards + 1)]
    return list(zip(edges[:-1], edges[1:]))


def _run(fn, key, lo, hi, args):
    items, shared = _SHARED[key]
    return fn(items[lo:hi], *shared, *args)


def map_shards(fn, items, threads: int, *args, shared: tuple = ()) -> list:
    items = list(items) if not isinstance(items, (list, tuple)) else items
    bounds = shard_bounds(len(items), threads)
    if threads <= 1 or len(bounds) <= 1:
        return [fn(items[lo:hi], *shared, *args) for lo, hi in bounds]
    key = next(_keys)
    _SHARED[key] = (items, shared)
    try:
        with ProcessPoolExecutor(max_workers=threads, mp_context=mp.get_context("fork")) as ex:
            futures = [ex.submit(_run, fn, key, lo, hi, args) for lo, hi in bounds]
            return [f.result() for f in futures]
    finally:
        del _SHARED[key]
