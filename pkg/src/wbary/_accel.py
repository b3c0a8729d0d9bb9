"""Numba dispatch for the hot kernels.

``WBARY_NUMBA=0`` selects the pure-numpy path; anything else (or unset) uses
numba when it imports. ``WBARY_THREADS`` caps numba's thread pool.
"""
from __future__ import annotations

import os

_FALSE = {"0", "false", "no", "off"}

try:
    import numba
except ImportError:  # pragma: no cover - numba ships with the environment
    numba = None

USE_NUMBA = numba is not None and os.environ.get("WBARY_NUMBA", "1").strip().lower() not in _FALSE


def njit(fn):
    """Compile ``fn`` with numba when enabled, else return it untouched."""
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


def max_threads() -> int:
    raw = os.environ.get("WBARY_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1

