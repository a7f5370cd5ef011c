"""Concentration function, expansion coefficient and the Avr functional."""
from __future__ import annotations

import math

import numpy as np

from .. import _subsets
from ..mmcore import TAU_EXACT, TAU_MASS, FiniteMMSpace, IntervalBound, Kind
from .separation import uniform_cycle_step

EXACT_LIMIT = 18


def concentration_function(X: FiniteMMSpace, r: float, exact_limit=EXACT_LIMIT, tol=TAU_MASS) -> IntervalBound:
    """alpha_X(r) = sup{1 - mu(U_r(A)) : mu(A) >= 1/2}, U_r open."""
    if not r > 0:
        raise ValueError("r must be positive")
    if r > X.diameter:
        return IntervalBound.exact(0.0)
    if X.n <= exact_limit:
        mass = _subsets.subset_sums(X.weight)
        nbhd = _subsets.subset_or(_subsets.ball_masks(X.dist, r, strict=True))
        ok = mass >= 0.5 - tol
        val = float(np.max(1.0 - mass[nbhd[ok]]))
        return IntervalBound.exact(max(val, 0.0))
    # lower bound from balls grown to half mass; upper bound 1/2 since A lies in U_r(A)
    order = np.argsort(X.dist, axis=1, kind="stable")
    cm = np.cumsum(X.weight[order], axis=1)
    k = np.argmax(cm >= 0.5 - tol, axis=1)
    near = X.dist < r
    best = 0.0
    for x in range(X.n):
        A = order[x, : k[x] + 1]
        best = max(best, 1.0 - float(X.weight[near[A].any(axis=0)].sum()))
    return IntervalBound(best, max(best, 0.5), Kind.CERTIFIED)


def expansion_coefficient(X: FiniteMMSpace, kappa: float, rho: float, exact_limit=EXACT_LIMIT, tol=TAU_MASS) -> IntervalBound:
    """Exp(X; kappa, rho) with closed balls B_rho.

    If no subset has mass >= kappa the defining condition is vacuous and the
    supremum is +inf, returned as an exact infinite bound.
    """
    if not (kappa > 0 and rho > 0):
        raise ValueError("kappa and rho must be positive")
    if kappa > 1 + tol:
        return IntervalBound(math.inf, math.inf, Kind.EXACT)
    h = uniform_cycle_step(X)
    if h is not None:
        n = X.n
        k = max(1, int(math.ceil(kappa * n - tol * n)))
        steps = int(math.floor(rho / h + TAU_EXACT * max(1.0, rho / h)))
        return IntervalBound.exact(max(1.0, min(n, k + 2 * steps) / n / kappa))
    if X.n <= exact_limit:
        mass = _subsets.subset_sums(X.weight)
        ball = _subsets.subset_or(_subsets.ball_masks(X.dist, rho * (1 + TAU_EXACT)))
        ok = mass >= kappa - tol
        val = float(np.min(mass[ball[ok]])) / kappa
        return IntervalBound.exact(max(1.0, val))
    near = X.dist <= rho * (1 + TAU_EXACT)
    ball_mass = (near * X.weight[None, :]).sum(axis=1)
    lower = max(1.0, float(ball_mass.min()) / kappa)
    order = np.argsort(X.dist, axis=1, kind="stable")
    cm = np.cumsum(X.weight[order], axis=1)
    k = np.argmax(cm >= kappa - tol, axis=1)
    upper = math.inf
    for x in range(X.n):
        A = order[x, : k[x] + 1]
        upper = min(upper, float(X.weight[near[A].any(axis=0)].sum()) / kappa)
    upper = max(upper, lower)
    return IntervalBound(lower, upper, Kind.CERTIFIED)


def avr_functional(X: FiniteMMSpace, phi=None, C: float = 1.0) -> float:
    """Integral of phi(d(x, x')) against mu x mu; phi defaults to min(t, C)."""
    if phi is None:
        vals = np.minimum(X.dist, C)
    else:
        try:
            vals = np.asarray(phi(X.dist), dtype=float)
            if vals.shape != X.dist.shape:
                raise ValueError
        except Exception:
            vals = np.vectorize(phi, otypes=[float])(X.dist)
    return float(X.weight @ vals @ X.weight)
