"""Deterministic RNG substreams and an order-preserving process map."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Generator for the child stream ``keys`` of ``seed``.

    ``substream(seed, k)`` is the same stream as ``SeedSequence(seed).spawn(k + 1)[k]``,
    so results never depend on which worker drew them.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys)))


def default_jobs() -> int:
    return os.cpu_count() or 1


def pmap(func: Callable[[T], R], items: Sequence[T] | Iterable[T], jobs: int = 1,
         chunksize: int | None = None) -> list[R]:
    """``list(map(func, items))``, optionally spread over ``jobs`` processes.

    Output order always follows input order.
    """
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    jobs = min(jobs, len(items))
    if chunksize is None:
        chunksize = max(1, len(items) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(func, items, chunksize=chunksize))
