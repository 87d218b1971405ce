"""Closeness inference between data centers from a bandwidth matrix.

Bandwidth values cluster into levels; two levels closer than the
significance gap are merged (keeping the lower one). Each DC pair is then
ranked by which level its bandwidth sits on: 1 for the fastest level,
L for the slowest, so a higher number means the pair needs more help.
"""

from __future__ import annotations

from bisect import bisect_left

import numpy as np

from wanify.errors import ValidationError

DEFAULT_GAP = 100.0


def _check_matrix(bw):
    m = np.asarray(bw, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError("bandwidth matrix must be square")
    if not np.all(np.isfinite(m)) or np.any(m < 0):
        raise ValidationError("bandwidths must be finite and non-negative")
    return m


def unique_filtered_levels(bw, gap=DEFAULT_GAP):
    """Sorted unique bandwidth levels with near-duplicates removed.

    Walks the sorted unique values from the top down; a level whose gap to
    the one below (in the current, post-removal list) is under `gap` is
    dropped. Returns an ascending list.
    """
    if gap <= 0:
        raise ValidationError("significance gap must be positive")
    m = _check_matrix(bw)
    levels = list(np.unique(m))
    for i in range(len(levels) - 1, 0, -1):
        if levels[i] - levels[i - 1] < gap:
            del levels[i]
    return [float(x) for x in levels]


def closeness_for(value, levels):
    """Rank of one bandwidth value against an ascending level list.

    Exact hits map to their level; misses take the nearer bracketing level
    (ties and out-of-range values resolve to the lower / clamped end).
    Fastest level ranks 1.
    """
    if not levels:
        raise ValidationError("empty level list")
    n = len(levels)
    idx = bisect_left(levels, value)
    if idx < n and levels[idx] == value:
        k = idx + 1
    elif idx == 0:
        k = 1
    elif idx == n:
        k = n
    else:
        below = value - levels[idx - 1]
        above = levels[idx] - value
        k = idx if below <= above else idx + 1
    return n - k + 1


def infer_dc_relations(bw, gap=DEFAULT_GAP):
    """Closeness matrix for every ordered DC pair (diagonal included)."""
    m = _check_matrix(bw)
    levels = unique_filtered_levels(m, gap)
    n = m.shape[0]
    rel = np.ones((n, n), dtype=int)
    for i in range(n):
        for j in range(n):
            rel[i, j] = closeness_for(m[i, j], levels)
    return rel
