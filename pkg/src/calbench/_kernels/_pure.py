"""Pure NumPy implementations of the hot kernels.

Used when the compiled extension is unavailable (or forced via the
CALBENCH_PURE environment variable). Every function here has a compiled
twin in ``_core.pyx`` with identical semantics; parity is enforced by
tests. All kernels take scores/labels already sorted by score ascending
(stable), as contiguous float64 arrays.
"""

from __future__ import annotations

import numpy as np


def _prefix(a: np.ndarray) -> np.ndarray:
    out = np.empty(a.size + 1)
    out[0] = 0.0
    np.cumsum(a, out=out[1:])
    return out


def ew_stats(ss: np.ndarray, sl: np.ndarray, b: int):
    """Per-bin (count, score sum, label sum) for b equal-width bins.

    Bin k covers [k/b, (k+1)/b), last bin closed at 1. Empty bins have
    count 0.
    """
    n = ss.size
    edges = np.arange(1, b) / b
    bounds = np.empty(b + 1, dtype=np.intp)
    bounds[0] = 0
    bounds[-1] = n
    bounds[1:-1] = np.searchsorted(ss, edges, side="left")
    cs = _prefix(ss)
    cy = _prefix(sl)
    counts = np.diff(bounds).astype(np.int64)
    return counts, cs[bounds[1:]] - cs[bounds[:-1]], cy[bounds[1:]] - cy[bounds[:-1]]


def em_stats(ss: np.ndarray, sl: np.ndarray, b: int):
    """Per-bin (count, score sum, label sum) for b equal-mass bins.

    Bin k holds sorted indices [floor(k*n/b), floor((k+1)*n/b)); all bins
    are nonempty when b <= n.
    """
    n = ss.size
    bounds = (np.arange(b + 1, dtype=np.int64) * n) // b
    cs = _prefix(ss)
    cy = _prefix(sl)
    counts = np.diff(bounds)
    return counts, cs[bounds[1:]] - cs[bounds[:-1]], cy[bounds[1:]] - cy[bounds[:-1]]


def _binned_value(counts, sum_s, sum_y, n: int, p: float) -> float:
    nz = counts > 0
    cnt = counts[nz].astype(np.float64)
    gap = np.abs(sum_s[nz] / cnt - sum_y[nz] / cnt)
    return float(np.sum((cnt / n) * gap**p) ** (1.0 / p))


def em_sweep(ss: np.ndarray, sl: np.ndarray, p: float):
    """Monotone sweep over equal-mass binnings.

    Increases b from 2 until the bin heights stop being non-decreasing,
    then scores the last monotone binning. Returns (value, bins_used).
    """
    n = ss.size
    if n == 1:
        return float(abs(ss[0] - sl[0])), 1
    cy = _prefix(sl)
    b_used = n
    for b in range(2, n + 1):
        bounds = (np.arange(b + 1, dtype=np.int64) * n) // b
        h = (cy[bounds[1:]] - cy[bounds[:-1]]) / np.diff(bounds)
        if np.any(h[1:] < h[:-1]):
            b_used = b - 1
            break
    counts, sum_s, sum_y = em_stats(ss, sl, b_used)
    return _binned_value(counts, sum_s, sum_y, n, p), b_used


def ew_sweep(ss: np.ndarray, sl: np.ndarray, p: float):
    """Monotone sweep over equal-width binnings (empty bins skipped)."""
    n = ss.size
    if n == 1:
        return float(abs(ss[0] - sl[0])), 1
    cy = _prefix(sl)
    b_used = n
    for b in range(2, n + 1):
        edges = np.arange(1, b) / b
        bounds = np.empty(b + 1, dtype=np.intp)
        bounds[0] = 0
        bounds[-1] = n
        bounds[1:-1] = np.searchsorted(ss, edges, side="left")
        counts = np.diff(bounds)
        nz = counts > 0
        h = (cy[bounds[1:]] - cy[bounds[:-1]])[nz] / counts[nz]
        if np.any(h[1:] < h[:-1]):
            b_used = b - 1
            break
    counts, sum_s, sum_y = ew_stats(ss, sl, b_used)
    return _binned_value(counts, sum_s, sum_y, n, p), b_used


def pav(y: np.ndarray) -> np.ndarray:
    """Pool-adjacent-violators: least-squares non-decreasing fit to y."""
    n = y.size
    sums = np.empty(n)
    cnts = np.empty(n, dtype=np.int64)
    top = 0
    for v in y:
        sums[top] = v
        cnts[top] = 1
        top += 1
        # merge while the previous block mean exceeds the current one
        while top >= 2 and sums[top - 2] * cnts[top - 1] > sums[top - 1] * cnts[top - 2]:
            sums[top - 2] += sums[top - 1]
            cnts[top - 2] += cnts[top - 1]
            top -= 1
    return np.repeat(sums[:top] / cnts[:top], cnts[:top])
