"""Tables indexed by subsets of a small point set (bit i of the index = point i)."""
from __future__ import annotations

import numpy as np

MAX_BITS = 24


def _check(n):
    if n > MAX_BITS:
        raise ValueError(f"subset tables limited to {MAX_BITS} points")


def subset_sums(w):
    w = np.asarray(w, dtype=float)
    n = w.size
    _check(n)
    out = np.zeros(1 << n)
    for i in range(n):
        h = 1 << i
        out[h : 2 * h] = out[:h] + w[i]
    return out


def subset_or(point_masks):
    """For every subset S, the bitwise OR of ``point_masks[i]`` over i in S."""
    pm = np.asarray(point_masks, dtype=np.int64)
    n = pm.size
    _check(n)
    out = np.zeros(1 << n, dtype=np.int64)
    for i in range(n):
        h = 1 << i
        out[h : 2 * h] = out[:h] | pm[i]
    return out


def ball_masks(dist, r, strict=False):
    """Bitmask of the ball of radius r around each point (open if strict)."""
    near = dist < r if strict else dist <= r
    n = dist.shape[0]
    weights = np.left_shift(np.int64(1), np.arange(n, dtype=np.int64))
    return (near.astype(np.int64) * weights[None, :]).sum(axis=1)


def subset_diameters(dist):
    dist = np.asarray(dist, dtype=float)
    n = dist.shape[0]
    _check(n)
    out = np.zeros(1 << n)
    for i in range(n):
        h = 1 << i
        md = np.zeros(1)
        for j in range(i):
            md = np.concatenate([md, np.maximum(md, dist[i, j])])
        out[h : 2 * h] = np.maximum(out[:h], md)
    return out


def popcount(x):
    x = np.asarray(x, dtype=np.int64)
    c = np.zeros(x.shape, dtype=np.int64)
    y = x.copy()
    while np.any(y):
        c += y & 1
        y >>= 1
    return c
