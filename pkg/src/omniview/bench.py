"""Benchmark harness: timing rounds and process tuning for measurement runs.

Timings on shared or frequency-scaled machines drift by integer factors over
seconds, so comparing resolutions fairly requires interleaving: every round
times each case once, and the per-case statistics are taken across rounds.
"""

from __future__ import annotations

import ctypes
import platform
import sys
import time
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

_M_MMAP_THRESHOLD = -3
_allocator_configured = False


def configure_allocator(threshold_bytes: int = 64 * 1024 * 1024) -> bool:
    """Raise glibc's malloc mmap threshold so multi-MB numpy temporaries are
    recycled instead of being mmapped and page-faulted on every operation.

    The projection hot loops allocate ~0.5-2 MB scratch arrays thousands of
    times per second; with the default threshold each one costs a fresh set
    of page faults. No-op (returns False) on non-glibc platforms.
    """
    global _allocator_configured
    if _allocator_configured:
        return True
    if not sys.platform.startswith("linux"):
        return False
    try:
        libc = ctypes.CDLL("libc.so.6")
        ok = bool(libc.mallopt(_M_MMAP_THRESHOLD, threshold_bytes))
        _allocator_configured = ok
        return ok
    except OSError:
        return False


@dataclass
class TimingStats:
    mean_ms: float
    p50_ms: float
    p95_ms: float
    min_ms: float
    runs: int

    def to_dict(self) -> dict:
        return {
            "mean_ms": self.mean_ms,
            "p50_ms": self.p50_ms,
            "p95_ms": self.p95_ms,
            "min_ms": self.min_ms,
            "runs": self.runs,
        }


def time_interleaved(
    cases: Mapping[str, Callable[[], object]], rounds: int, warmup: int = 1
) -> dict[str, TimingStats]:
    """Time each case once per round, rotating through all cases.

    Returns per-case statistics over the rounds. ``rounds`` must be >= 1.
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    keys = list(cases)
    samples: dict[str, list[float]] = {k: [] for k in keys}
    for _ in range(warmup):
        for k in keys:
            cases[k]()
    for _ in range(rounds):
        for k in keys:
            start = time.perf_counter()
            cases[k]()
            samples[k].append(time.perf_counter() - start)
    out = {}
    for k in keys:
        arr = np.asarray(samples[k]) * 1000.0
        out[k] = TimingStats(
            mean_ms=float(arr.mean()),
            p50_ms=float(np.percentile(arr, 50)),
            p95_ms=float(np.percentile(arr, 95)),
            min_ms=float(arr.min()),
            runs=rounds,
        )
    return out


def machine_metadata() -> dict:
    import os

    return {
        "platform": platform.platform(),
        "machine": platform.machine(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "cpu_count": os.cpu_count(),
    }
