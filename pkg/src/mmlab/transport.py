"""Distances and functionals between probability measures on one finite space."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _subsets
from ._flows import bipartite_maxflow, transport_ssp
from .errors import BaseHasZero, DimensionMismatch
from .mmcore import TAU_EXACT, TAU_MASS, FiniteMMSpace, IntervalBound, Kind, LineMeasure, SubCoupling


def _as_measure(X: FiniteMMSpace, w, name) -> np.ndarray:
    w = np.asarray(w, dtype=float).ravel()
    if w.size != X.n:
        raise DimensionMismatch(f"{name} has {w.size} entries, space has {X.n} points")
    if np.any(w < -TAU_MASS) or not np.all(np.isfinite(w)):
        raise ValueError(f"{name} must be a nonnegative finite vector")
    if abs(math.fsum(w) - 1.0) > TAU_MASS:
        raise ValueError(f"{name} must sum to 1")
    return np.maximum(w, 0.0)


@dataclass(frozen=True)
class MeasurePair:
    space: FiniteMMSpace
    mu: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", _as_measure(self.space, self.mu, "mu"))
        object.__setattr__(self, "nu", _as_measure(self.space, self.nu, "nu"))


# Prohorov


def _critical_thresholds(dist):
    return np.unique(np.concatenate([[0.0], dist.ravel()]))


def _prohorov_from_cands(cands, gap):
    """min_k max(c_k, gap(k)) for increasing c and nonincreasing gap, by bisection.

    Returns (value, k) with k the index whose interval attains the minimum.
    """
    lo, hi = 0, len(cands) - 1
    if cands[hi] < gap(hi):
        return gap(hi), hi
    # first k with cands[k] >= gap(k)
    while lo < hi:
        mid = (lo + hi) // 2
        if cands[mid] >= gap(mid):
            hi = mid
        else:
            lo = mid + 1
    best, arg = float(cands[lo]), lo
    if lo > 0:
        g = gap(lo - 1)
        if g < best:
            best, arg = g, lo - 1
    return best, arg


def mass_deficit(flow: float) -> float:
    """1 - flow, with float noise below TAU_EXACT read as zero."""
    g = 1.0 - flow
    return g if g > TAU_EXACT else 0.0


def prohorov_distance(X: FiniteMMSpace, mu, nu, return_coupling=False):
    """Exact Prohorov distance between two measures on X.

    eps is feasible when a sub-coupling supported on {d <= eps} carries
    mass >= 1 - eps; the maximal such mass is a bipartite max-flow.
    """
    mu = _as_measure(X, mu, "mu")
    nu = _as_measure(X, nu, "nu")
    D = X.dist
    cands = _critical_thresholds(D)
    tol = TAU_EXACT * max(1.0, float(cands[-1]))
    flows = {}

    def gap(k):
        if k not in flows:
            flows[k] = bipartite_maxflow(nu, mu, D <= cands[k] + tol)
        return mass_deficit(flows[k][0])

    value, k = _prohorov_from_cands(cands, gap)
    value = min(1.0, value)
    bound = IntervalBound.exact(value)
    if not return_coupling:
        return bound
    gap(k)
    plan = flows[k][1]
    return bound, SubCoupling(plan, nu, mu)


def prohorov_by_subsets(X: FiniteMMSpace, mu, nu) -> float:
    """Definitional value: min eps with mu(B_eps(A)) >= nu(A) - eps for every A."""
    mu = _as_measure(X, mu, "mu")
    nu = _as_measure(X, nu, "nu")
    nu_A = _subsets.subset_sums(nu)
    mu_tab = _subsets.subset_sums(mu)
    best = 1.0
    for c in _critical_thresholds(X.dist):
        balls = _subsets.ball_masks(X.dist, c)
        h = float(np.max(nu_A - mu_tab[_subsets.subset_or(balls)]))
        best = min(best, max(float(c), h))
    return best


def lambda_prohorov(X: FiniteMMSpace, mu, nu, lam: float) -> IntervalBound:
    if not lam > 0:
        raise ValueError("lambda must be positive")
    scaled = FiniteMMSpace(X.labels, X.dist * lam, X.weight)
    return IntervalBound.exact(prohorov_distance(scaled, mu, nu).value / lam)


# Prohorov on the real line


def line_window_flow(xs, a, ys, b, eps) -> float:
    """Max mass of b (at ys) matchable into a (at xs) within distance eps.

    Both position arrays sorted. Windows all have width 2 eps, so serving
    each y from the leftmost remaining x in its window is optimal.
    """
    cap = np.array(a, dtype=float)
    n = len(xs)
    j = 0
    total = 0.0
    xs_l = xs.tolist()
    for y, r in zip(ys.tolist(), b.tolist()):
        left = y - eps
        while j < n and (xs_l[j] < left or cap[j] <= 0.0):
            j += 1
        k = j
        right = y + eps
        while r > 0.0 and k < n and xs_l[k] <= right:
            c = cap[k]
            if c > 0.0:
                d = c if c < r else r
                cap[k] = c - d
                r -= d
                total += d
            k += 1
    return total


def line_prohorov_distance(p: LineMeasure, q: LineMeasure, candidates=None) -> float:
    """Exact d_P between two atomic probability measures on the line.

    ``candidates`` (sorted, containing 0) restricts the threshold search; by
    default all pairwise atom gaps are used.
    """
    xs, a = p.positions, p.masses
    ys, b = q.positions, q.masses
    if candidates is None:
        candidates = np.unique(np.concatenate([[0.0], np.abs(xs[:, None] - ys[None, :]).ravel()]))
    cands = np.asarray(candidates, dtype=float)
    tol = TAU_EXACT * max(1.0, float(cands[-1]))
    memo = {}

    def gap(k):
        if k not in memo:
            memo[k] = max(0.0, 1.0 - line_window_flow(xs, a, ys, b, cands[k] + tol))
        return memo[k]

    value, _ = _prohorov_from_cands(cands, gap)
    return min(1.0, value)


def _nearest_grid(values, h, lo_k, hi_k):
    k = np.clip(np.rint(np.asarray(values) / h), lo_k, hi_k).astype(np.int64)
    return k


def prohorov_to_gaussian(nu: LineMeasure, h: float = 1e-3, L: float = 8.0) -> IntervalBound:
    """Certified enclosure of d_P(nu, gamma^1).

    Both measures are moved to the grid hZ cap [-L, L]; the moves are
    bounded in Ky Fan distance, and on the grid d_P is computed exactly.
    """
    K = int(math.ceil(L / h))
    grid_k = np.arange(-K, K + 1)
    edges = (grid_k[:-1] + 0.5) * h
    cdf = 0.5 * (1.0 + np.array([math.erf(e / math.sqrt(2.0)) for e in edges]))
    g_mass = np.diff(np.concatenate([[0.0], cdf, [1.0]]))
    tail = 2.0 * 0.5 * math.erfc((K + 0.5) * h / math.sqrt(2.0))
    e_gauss = max(h / 2, tail)

    kk = _nearest_grid(nu.positions, h, -K, K)
    moved = np.abs(nu.positions - kk * h)
    e_emp = ky_fan_from_discrepancy(nu.masses, moved)
    e_mass = np.zeros(2 * K + 1)
    np.add.at(e_mass, kk + K, nu.masses)

    keep_e = e_mass > 0
    keep_g = g_mass > 0
    p = LineMeasure(grid_k[keep_e] * h, e_mass[keep_e] / e_mass.sum())
    q = LineMeasure(grid_k[keep_g] * h, g_mass[keep_g] / g_mass.sum())
    cands = np.arange(0, 2 * K + 1) * h
    g = line_prohorov_distance(p, q, candidates=cands)
    slack = e_emp + e_gauss
    return IntervalBound(max(0.0, g - slack), min(1.0, g + slack), Kind.CERTIFIED)


# Ky Fan


def ky_fan_from_discrepancy(weight, disc) -> float:
    """min eps >= 0 with weight{disc > eps} <= eps."""
    w = np.asarray(weight, dtype=float)
    d = np.asarray(disc, dtype=float)
    vals, inv = np.unique(np.concatenate([[0.0], d]), return_inverse=True)
    mass_at = np.zeros(vals.size)
    np.add.at(mass_at, inv[1:], w)
    above = np.concatenate([np.cumsum(mass_at[::-1])[::-1][1:], [0.0]])  # mass strictly above vals[k]
    return float(np.min(np.maximum(vals, above)))


def ky_fan_distance(X: FiniteMMSpace, f, g, target_dist=None) -> float:
    """Ky Fan distance between f, g : X -> Y.

    For real-valued maps pass the value arrays. For a general target pass
    ``target_dist`` (a matrix over target indices) and integer arrays f, g.
    """
    if target_dist is None:
        disc = np.abs(np.asarray(f, dtype=float) - np.asarray(g, dtype=float))
    else:
        T = np.asarray(target_dist, dtype=float)
        disc = T[np.asarray(f, dtype=int), np.asarray(g, dtype=int)]
    if disc.size != X.n:
        raise DimensionMismatch("one value per point required")
    return ky_fan_from_discrepancy(X.weight, disc)


# Wasserstein


def wasserstein_distance(X: FiniteMMSpace, mu, nu, p: float = 1.0):
    """Exact W_p with an optimal coupling (min-cost flow with cost d^p)."""
    if not (p >= 1) or math.isinf(p):
        raise ValueError("p must be in [1, inf)")
    mu = _as_measure(X, mu, "mu")
    nu = _as_measure(X, nu, "nu")
    cost, plan, _, _ = transport_ssp(mu, nu, X.dist**p)
    value = max(cost, 0.0) ** (1.0 / p)
    return IntervalBound.exact(value), SubCoupling(plan, mu, nu)


def kantorovich_potential(X: FiniteMMSpace, mu, nu):
    """A 1-Lipschitz f maximising int f dmu - int f dnu, and the W_1 cost.

    f is read off the residual graph of an optimal transport plan.
    """
    mu = _as_measure(X, mu, "mu")
    nu = _as_measure(X, nu, "nu")
    D = X.dist
    cost, plan, _, _ = transport_ssp(mu, nu, D)
    n = X.n
    # edges x -> y of length d(x, y); reverse y -> x of length -d(x, y) on the support
    W = D.copy()
    supp = (plan > 1e-14) & ~np.eye(n, dtype=bool)
    W = np.where(supp.T, np.minimum(W, -D.T), W)
    np.fill_diagonal(W, 0.0)
    pot = np.zeros(n)
    for _ in range(n + 1):
        new = np.minimum(pot, (pot[:, None] + W).min(axis=0))
        if np.allclose(new, pot, rtol=0, atol=0):
            break
        pot = new
    f = -pot
    return f, cost


def w1_line(xs, mu, nu) -> float:
    """W_1 on the line via the integral of |F - G|."""
    xs = np.asarray(xs, dtype=float)
    order = np.argsort(xs)
    x = xs[order]
    F = np.cumsum(np.asarray(mu, dtype=float)[order])
    G = np.cumsum(np.asarray(nu, dtype=float)[order])
    return float(np.sum(np.abs(F - G)[:-1] * np.diff(x)))


# entropy and CD


def _U(r):
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(r > 0, r * np.log(np.where(r > 0, r, 1.0)), 0.0)


def relative_entropy(base, nu) -> float:
    base = np.asarray(base, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if base.shape != nu.shape:
        raise DimensionMismatch("base and nu differ in length")
    if np.any(base <= 0):
        raise BaseHasZero(f"base measure vanishes at {int(np.flatnonzero(base <= 0)[0])}")
    return float(np.sum(base * _U(nu / base)))


@dataclass(frozen=True)
class CDInstance:
    space: FiniteMMSpace
    K: float
    t: float
    nu0: np.ndarray
    nu1: np.ndarray
    epsilon: float = 0.0

    def __post_init__(self):
        if not (0 < self.t < 1):
            raise ValueError("t must be in (0, 1)")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        object.__setattr__(self, "nu0", _as_measure(self.space, self.nu0, "nu0"))
        object.__setattr__(self, "nu1", _as_measure(self.space, self.nu1, "nu1"))


def _spanning_trees(n, m):
    cells = [(i, j) for i in range(n) for j in range(m)]
    trees = []
    for combo in itertools.combinations(range(n * m), n + m - 1):
        parent = list(range(n + m))

        def find(u):
            while parent[u] != u:
                parent[u] = parent[parent[u]]
                u = parent[u]
            return u

        ok = True
        for c in combo:
            i, j = cells[c]
            ri, rj = find(i), find(n + j)
            if ri == rj:
                ok = False
                break
            parent[ri] = rj
        if ok:
            trees.append(combo)
    return cells, trees


class _BatchOT:
    """Exact W_p^p from many measures to one fixed measure on <= 3 points.

    An optimal plan sits at a basic feasible solution, one per spanning
    tree of the complete bipartite graph; all of them are solved at once.
    """

    def __init__(self, cost, target):
        n, m = cost.shape
        cells, trees = _spanning_trees(n, m)
        A = np.zeros((n + m, n * m))
        for c, (i, j) in enumerate(cells):
            A[i, c] = 1.0
            A[n + j, c] = 1.0
        self.n = n
        self.target = np.asarray(target, dtype=float)
        self.solvers = []
        for t in trees:
            At = A[:, list(t)]
            self.solvers.append((np.linalg.pinv(At), cost.ravel()[list(t)]))

    def __call__(self, batch):
        batch = np.atleast_2d(batch)
        rhs = np.concatenate([batch, np.broadcast_to(self.target, (batch.shape[0], self.target.size))], axis=1)
        best = np.full(batch.shape[0], np.inf)
        for pinv, c in self.solvers:
            x = rhs @ pinv.T
            ok = np.all(x >= -1e-12, axis=1)
            val = x @ c
            best = np.where(ok & (val < best), val, best)
        return np.maximum(best, 0.0)


def _simplex_grid(n, res):
    if n == 1:
        return np.ones((1, 1))
    pts = []
    for combo in itertools.combinations(range(res + n - 1), n - 1):
        prev = -1
        parts = []
        for c in combo:
            parts.append(c - prev - 1)
            prev = c
        parts.append(res + n - 2 - prev)
        pts.append(parts)
    return np.array(pts, dtype=float) / res


def _project_simplex(v):
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def cd_deficiency(inst: CDInstance, s_grid: int = 101, refine_steps: int = 200, simplex_resolution: int = 200, exhaustive=None):
    """Smallest violation of the CD(K, inf) inequalities over candidate nu_t.

    Returns (deficiency, witness). Candidates are the segment
    (1-s) nu0 + s nu1 on ``s_grid`` points, a projected subgradient descent
    from the best of those, and, on spaces with at most three points (or
    when ``exhaustive`` is true), every point of the simplex grid of step
    1/simplex_resolution.
    """
    X, K, t, eps = inst.space, inst.K, inst.t, inst.epsilon
    mu = X.weight
    C = X.dist**2
    nu0, nu1 = inst.nu0, inst.nu1
    W2 = math.sqrt(max(transport_ssp(nu0, nu1, C)[0], 0.0))
    E0 = relative_entropy(mu, nu0)
    E1 = relative_entropy(mu, nu1)
    ent_bound = (1 - t) * E0 + t * E1 - 0.5 * K * t * (1 - t) * W2**2 + eps
    b0 = t * W2 + eps
    b1 = (1 - t) * W2 + eps

    def ent_batch(B):
        return np.sum(mu * _U(B / mu), axis=1)

    if exhaustive is None:
        exhaustive = X.n <= 3
    small = X.n <= 3

    if small:
        ot0, ot1 = _BatchOT(C, nu0), _BatchOT(C, nu1)

        def w2_batch(B):
            return np.sqrt(ot0(B)), np.sqrt(ot1(B))
    else:

        def w2_batch(B):
            r0 = np.array([math.sqrt(max(transport_ssp(b, nu0, C)[0], 0.0)) for b in B])
            r1 = np.array([math.sqrt(max(transport_ssp(b, nu1, C)[0], 0.0)) for b in B])
            return r0, r1

    def objective(B):
        B = np.atleast_2d(B)
        w0, w1 = w2_batch(B)
        terms = np.stack([w0 - b0, w1 - b1, ent_batch(B) - ent_bound, np.zeros(len(B))])
        return terms.max(axis=0), terms

    s = np.linspace(0.0, 1.0, s_grid)
    cands = (1 - s)[:, None] * nu0[None, :] + s[:, None] * nu1[None, :]
    vals, _ = objective(cands)
    k = int(np.argmin(vals))
    best, witness = float(vals[k]), cands[k].copy()

    if exhaustive:
        grid = _simplex_grid(X.n, simplex_resolution)
        for chunk in np.array_split(grid, max(1, len(grid) // 4096)):
            gv, _ = objective(chunk)
            j = int(np.argmin(gv))
            if gv[j] < best:
                best, witness = float(gv[j]), chunk[j].copy()

    if refine_steps and best > 0 and X.n > 1:
        x = witness.copy()
        step0 = 0.25
        for it in range(refine_steps):
            val, terms = objective(x)
            if val[0] <= 0:
                break
            which = int(np.argmax(terms[:3, 0]))
            if which == 2:
                grad = np.log(np.maximum(x, 1e-300) / mu) + 1.0
            else:
                target = nu0 if which == 0 else nu1
                cost, _, u, _ = transport_ssp(x, target, C)
                w = math.sqrt(max(cost, 0.0))
                grad = u / (2 * w) if w > 1e-12 else u
            grad = grad - grad.mean()
            norm = np.linalg.norm(grad)
            if not np.isfinite(norm) or norm == 0:
                break
            x = _project_simplex(x - step0 / math.sqrt(it + 1) * grad / norm)
            v, _ = objective(x)
            if v[0] < best:
                best, witness = float(v[0]), x.copy()
    return max(best, 0.0), witness
