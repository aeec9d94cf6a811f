"""Deterministic chunked map over trial indices.

Trials are cut into chunks of a fixed size that does not depend on the number
of workers; each chunk is reduced on its own and the per-chunk results come
back in chunk order.  Reports built from them are therefore identical for any
worker count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

from . import _kernels as K
from .errors import FlightCapExceeded, InvalidConfig

CHUNK = 1 << 14
ENV_THREADS = "LORENTZ_THREADS"

R = TypeVar("R")


def default_workers() -> int:
    env = os.environ.get(ENV_THREADS)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise InvalidConfig(ENV_THREADS, f"{env!r} is not an integer") from None
        if n < 1:
            raise InvalidConfig(ENV_THREADS, "must be at least 1")
        return n
    return os.cpu_count() or 1


def chunk_bounds(total: int, chunk: int = CHUNK) -> list[tuple[int, int]]:
    return [(s, min(chunk, total - s)) for s in range(0, total, chunk)]


def map_chunks(fn: Callable[[int, int], R], total: int, workers: int | None = None,
               chunk: int = CHUNK) -> list[R]:
    """Apply ``fn(start, count)`` to every chunk of ``range(total)``, in order."""
    bounds = chunk_bounds(total, chunk)
    w = default_workers() if workers is None else int(workers)
    if w < 1:
        raise InvalidConfig("threads", "must be at least 1")
    if w == 1 or len(bounds) <= 1:
        return [fn(s, c) for s, c in bounds]
    with ThreadPoolExecutor(max_workers=min(w, len(bounds))) as pool:
        return list(pool.map(lambda b: fn(*b), bounds))


def fsum(values: Sequence[float]) -> float:
    # correctly rounded, so independent of the order partials arrive in
    return math.fsum(values)


def check_status(status: np.ndarray, start: int) -> None:
    bad = np.flatnonzero(status != K.OK)
    if bad.size:
        k = int(bad[0])
        raise FlightCapExceeded(
            f"trial {start + k}: flight failed (status {int(status[k])})", trial=start + k)
