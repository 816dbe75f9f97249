"""Per-image parallel map whose output order never depends on the worker count."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")

JOBS_ENV = "SSOD_JOBS"


def resolve_jobs(jobs: int | None = None) -> int:
    """Explicit ``jobs`` wins, then ``$SSOD_JOBS``, then 1."""
    if jobs is None:
        raw = os.environ.get(JOBS_ENV, "").strip()
        jobs = int(raw) if raw else 1
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    return jobs


def pmap(fn: Callable[[T], R], items: Iterable[T], jobs: int | None = None) -> list[R]:
    items = list(items)
    n = resolve_jobs(jobs)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
