"""Process-wide runtime knobs and deterministic reductions.

Thread count only affects FFT worker dispatch; all result-bearing
reductions go through :func:`dsum` / :func:`ddot`, which use NumPy's
pairwise summation on a single thread, so outputs are bitwise
reproducible at any thread count.
"""

from __future__ import annotations

import math
import os

import numpy as np

_workers = 1


def set_workers(count: int) -> None:
    """Set the FFT worker count (1 = serial)."""
    global _workers
    _workers = max(1, int(count))


def get_workers() -> int:
    return _workers


def workers_from_env(default: int = 1) -> int:
    """Resolve worker count from HOMOGLAB_THREADS, falling back to *default*."""
    raw = os.environ.get("HOMOGLAB_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return default


def dsum(a: np.ndarray) -> float:
    # np.sum is pairwise and single-threaded: deterministic across runs.
    return float(np.sum(a))


def ddot(a: np.ndarray, b: np.ndarray) -> float:
    # Elementwise product + pairwise sum; never BLAS (thread-dependent).
    return float(np.sum(a * b))


def dsum_exact(a: np.ndarray) -> float:
    """Correctly rounded sum of all entries.

    Order-invariant and exact under cancellation, unlike pairwise
    summation; field means use this so that a field whose true total is
    zero reports a mean of literal 0.0. Slower than :func:`dsum`, so the
    iterative-solver inner products stay pairwise.
    """
    flat = np.asarray(a, dtype=np.float64).ravel()
    return math.fsum(flat.tolist())
