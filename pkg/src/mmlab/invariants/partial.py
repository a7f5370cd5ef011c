"""Partial diameters of line measures and of finite spaces."""
from __future__ import annotations

import numpy as np

from .. import _subsets
from ..mmcore import TAU_MASS, FiniteMMSpace, IntervalBound, Kind, LineMeasure

EXACT_LIMIT = 16


def partial_diameter(nu: LineMeasure, alpha: float, tol=TAU_MASS) -> float:
    """diam(nu; alpha): the shortest atom window carrying mass >= alpha.

    alpha <= 0 and alpha > total both return 0 by convention.
    """
    if alpha <= 0 or alpha > nu.total + tol:
        return 0.0
    pos = nu.positions
    C = np.concatenate([[0.0], np.cumsum(nu.masses)])
    # window [i, j] qualifies iff C[j+1] - C[i] >= alpha
    ends = np.searchsorted(C, C[:-1] + alpha - tol, side="left") - 1
    ok = ends < pos.size
    if not np.any(ok):
        return 0.0
    i = np.flatnonzero(ok)
    spans = pos[ends[ok]] - pos[i]
    return float(max(spans.min(), 0.0))


def ball_radii(X: FiniteMMSpace, alpha: float, tol=TAU_MASS):
    """For each x, the least r with mu(B_r(x)) >= alpha, and the ball's point order."""
    order = np.argsort(X.dist, axis=1, kind="stable")
    sd = np.take_along_axis(X.dist, order, axis=1)
    cm = np.cumsum(X.weight[order], axis=1)
    k = np.argmax(cm >= alpha - tol, axis=1)
    return sd[np.arange(X.n), k], order, k


def partial_diameter_space(X: FiniteMMSpace, alpha: float, exact_limit=EXACT_LIMIT, tol=TAU_MASS) -> IntervalBound:
    """diam(X; alpha), exact for small X and a certified interval otherwise."""
    if alpha <= float(X.weight.max()) + tol or alpha > 1 + tol:
        return IntervalBound.exact(0.0)
    if X.n <= exact_limit:
        mass = _subsets.subset_sums(X.weight)
        diam = _subsets.subset_diameters(X.dist)
        return IntervalBound.exact(float(diam[mass >= alpha - tol].min()))
    r, order, k = ball_radii(X, alpha, tol)
    # a set of mass >= alpha sits inside the closed ball of radius diam(A) around each of its points
    lower = float(r.min())
    upper = np.inf
    for x in np.argsort(r)[: min(X.n, 64)]:
        pts = order[x, : k[x] + 1]
        upper = min(upper, float(X.dist[np.ix_(pts, pts)].max()))
    return IntervalBound(lower, upper, Kind.CERTIFIED)
