"""Observable diameter and Levy radius with real-valued 1-Lipschitz observables.

Exact mode enumerates the orderings of the function values. Inside the
closed chamber f_(1) <= ... <= f_(n) the partial diameter is the least span
f_(b) - f_(a) over the minimal windows [a, b] of mass >= 1 - kappa, so the
chamber optimum is the largest t for which the difference constraints

    f_(a) - f_(b) <= -t      (minimal windows)
    f_(p) - f_(p+1) <= 0     (ordering)
    f_i - f_j <= d_ij        (Lipschitz)

have no negative cycle. That t equals the minimum cycle mean of the
window-to-window graph built from shortest paths without window edges, which
we get from Karp's recurrence for all chambers at once.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .._flows import bellman_ford_potentials, floyd_warshall
from ..errors import InstanceTooLarge
from ..mmcore import TAU_EXACT, TAU_MASS, FiniteMMSpace, IntervalBound, Kind, median_levy_mean, pushforward
from .partial import partial_diameter
from .separation import separation_distance

EXACT_LIMIT = 8
LERAD_EXACT_LIMIT = 6


@dataclass(frozen=True)
class ObsDiamResult:
    bound: IntervalBound
    witness: np.ndarray

    @property
    def value(self):
        return self.bound.value


def observable_value(X: FiniteMMSpace, f, kappa: float) -> float:
    """diam(f_* mu; 1 - kappa) for one observable f."""
    return partial_diameter(pushforward(X, f), 1.0 - kappa)


def _orderings(n):
    """Permutations up to reversal (f and -f give the same value)."""
    if n == 1:
        return np.zeros((1, 1), dtype=int)
    perms = np.array(list(itertools.permutations(range(n))), dtype=int)
    return perms[perms[:, 0] < perms[:, -1]]


class ChamberSolver:
    """Caches everything about X that does not depend on kappa."""

    def __init__(self, X: FiniteMMSpace, perms=None):
        self.X = X
        n = X.n
        self.perms = _orderings(n) if perms is None else np.atleast_2d(perms)
        P = len(self.perms)
        # position-indexed graph: W[p, q] = length of edge q -> p ... we use W[u, v] for u -> v
        Dp = X.dist[self.perms[:, :, None], self.perms[:, None, :]]  # (P, n, n) distances by position
        # Lipschitz: f_u - f_v <= d_uv is the edge v -> u of length d_uv (symmetric)
        W = Dp.copy()
        idx = np.arange(n - 1)
        # ordering f_(p) - f_(p+1) <= 0: edge p+1 -> p of length 0
        W[:, idx + 1, idx] = 0.0
        W[:, np.arange(n), np.arange(n)] = 0.0
        self.W = W
        self.D0 = floyd_warshall(W)  # D0[:, u, v]: shortest u -> v without window edges
        self.masses = X.weight[self.perms]
        self.cum = np.concatenate([np.zeros((P, 1)), np.cumsum(self.masses, axis=1)], axis=1)

    def windows(self, kappa, tol=TAU_MASS):
        """Minimal windows per chamber as arrays a, b of shape (P, n), -1 padded."""
        n = self.X.n
        alpha = 1.0 - kappa
        C = self.cum
        # end[p, a] = least b with C[b+1] - C[a] >= alpha, n if none
        target = C[:, :n] + alpha - tol
        ends = np.empty((len(C), n), dtype=int)
        for a in range(n):
            ends[:, a] = np.argmax(C[:, a + 1 :] >= target[:, a, None], axis=1) + a
            ends[:, a] = np.where(C[:, -1] >= target[:, a], ends[:, a], n)
        ok = ends < n
        nxt = np.concatenate([ends[:, 1:], np.full((len(C), 1), n)], axis=1)
        minimal = ok & (nxt > ends)
        a_idx = np.where(minimal, np.arange(n)[None, :], -1)
        b_idx = np.where(minimal, ends, -1)
        return a_idx, b_idx

    def chamber_values(self, kappa, tol=TAU_MASS):
        """Optimal t for every chamber (Karp minimum cycle mean)."""
        n = self.X.n
        P = len(self.perms)
        if kappa >= 1 or n == 1:
            return np.zeros(P)
        a_idx, b_idx = self.windows(kappa, tol)
        has = a_idx >= 0
        rows = np.arange(P)[:, None, None]
        a_safe = np.where(has, a_idx, 0)
        b_safe = np.where(has, b_idx, 0)
        # M[e, e'] = D0(a_e -> b_e') is the path from the head of window edge e to the tail of e'
        M = self.D0[rows, a_safe[:, :, None], b_safe[:, None, :]]
        valid = has[:, :, None] & has[:, None, :]
        M = np.where(valid, M, np.inf)
        V = n
        Dk = np.zeros((V + 1, P, V))
        Dk[0] = np.where(has, 0.0, np.inf)
        for k in range(1, V + 1):
            Dk[k] = (Dk[k - 1][:, :, None] + M).min(axis=1)
        with np.errstate(invalid="ignore"):
            ratios = (Dk[V][None] - Dk[:V]) / (V - np.arange(V))[:, None, None]
        ratios = np.where(np.isfinite(Dk[V])[None] & np.isfinite(Dk[:V]), ratios, -np.inf)
        per_vertex = ratios.max(axis=0)
        per_vertex = np.where(np.isfinite(Dk[V]), per_vertex, np.inf)
        vals = per_vertex.min(axis=1)
        vals = np.where(np.isfinite(vals), vals, 0.0)
        return np.maximum(vals, 0.0)

    def witness(self, c, kappa, t, tol=TAU_MASS):
        """A 1-Lipschitz function in chamber c meeting every window at level t."""
        n = self.X.n
        a_idx, b_idx = self.windows(kappa, tol)
        W = self.W[c].copy()
        for a, b in zip(a_idx[c], b_idx[c]):
            if a >= 0:
                W[b, a] = min(W[b, a], -t)
        # tiny relaxation guards against a zero cycle read as negative in floating point
        W_relaxed = W + np.where(np.isfinite(W) & (W < 0), 1e-13 * max(1.0, t), 0.0)
        pot, _ = bellman_ford_potentials(W_relaxed)
        f_pos = pot - pot.min()
        f = np.empty(n)
        f[self.perms[c]] = f_pos
        return f


def _fix_lipschitz(X, f):
    """Shrink f slightly so that it is 1-Lipschitz to within rounding."""
    excess = (np.abs(f[:, None] - f[None, :]) - X.dist).max()
    if excess <= 0:
        return f
    ratio = np.where(X.dist > 0, np.abs(f[:, None] - f[None, :]) / np.where(X.dist > 0, X.dist, 1.0), 0.0).max()
    return f / ratio if ratio > 1 else f


def _exact(X, kappa, solver=None):
    if X.n > EXACT_LIMIT:
        raise InstanceTooLarge("observable_diameter (exact)", X.n, EXACT_LIMIT)
    if kappa >= 1 or X.n == 1:
        return ObsDiamResult(IntervalBound.exact(0.0), np.zeros(X.n))
    solver = solver or ChamberSolver(X)
    vals = solver.chamber_values(kappa)
    c = int(np.argmax(vals))
    t = float(vals[c])
    if t <= 0:
        return ObsDiamResult(IntervalBound.exact(0.0), np.zeros(X.n))
    f = _fix_lipschitz(X, solver.witness(c, kappa, t))
    achieved = observable_value(X, f, kappa)
    value = max(t, achieved) if abs(achieved - t) <= 1e-9 * max(1.0, t) else t
    return ObsDiamResult(IntervalBound.exact(value), f)


def random_lipschitz(X: FiniteMMSpace, rng, mean_anchors=3.0):
    """min_i (c_i + d(x, a_i)) over a geometric number of random anchors."""
    k = int(rng.geometric(1.0 / mean_anchors))
    anchors = rng.integers(0, X.n, size=k)
    diam = X.diameter
    offsets = rng.uniform(0, diam if diam > 0 else 1.0, size=k)
    f = (X.dist[anchors] + offsets[:, None]).min(axis=0)
    return f - f.mean()


def _heuristic(X, kappa, restarts=32, seed=0):
    if kappa >= 1 or X.n == 1:
        return ObsDiamResult(IntervalBound(0.0, 0.0, Kind.ESTIMATE, samples=0, seed=seed), np.zeros(X.n))
    rng = np.random.default_rng(seed)
    best, best_f = 0.0, np.zeros(X.n)
    starts = [X.dist[i] for i in range(min(X.n, restarts // 2))]
    while len(starts) < restarts:
        starts.append(random_lipschitz(X, rng))
    for f in starts:
        seen = set()
        for _ in range(20):
            perm = tuple(np.argsort(f, kind="stable").tolist())
            if perm in seen:
                break
            seen.add(perm)
            solver = ChamberSolver(X, perms=np.array([perm]))
            t = float(solver.chamber_values(kappa)[0])
            if t <= 0:
                break
            f = _fix_lipschitz(X, solver.witness(0, kappa, t))
            v = observable_value(X, f, kappa)
            if v > best:
                best, best_f = v, f
    return ObsDiamResult(IntervalBound(best, best, Kind.ESTIMATE, samples=restarts, seed=seed), best_f)


def _sandwich(X, kappa, **sep_kw):
    if kappa >= 1 or X.n == 1:
        return ObsDiamResult(IntervalBound.exact(0.0), np.zeros(X.n))
    k2 = kappa * (1 + 1e-6)
    lo, lab = separation_distance(X, [k2, k2], return_witness=True, **sep_kw)
    hi = separation_distance(X, [kappa / 2, kappa / 2], **sep_kw)
    f = np.zeros(X.n)
    lower = lo.lower
    if lab is not None and lower > 0:
        A0 = np.flatnonzero(lab == 0)
        f = np.minimum(X.dist[A0].min(axis=0), lower)
        lower = min(lower, observable_value(X, f, kappa))
    upper = max(hi.upper, lower)
    return ObsDiamResult(IntervalBound(lower, upper, Kind.CERTIFIED), f)


def observable_diameter(X: FiniteMMSpace, kappa: float, mode: str = "exact", **kw) -> ObsDiamResult:
    """ObsDiam(X; -kappa) with screen R.

    mode: ``exact`` (n <= 8), ``heuristic`` (random restarts of the chamber
    solve) or ``sandwich`` (certified bounds from separation distances).
    """
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    mode = {"heur": "heuristic", "exact": "exact", "heuristic": "heuristic", "sandwich": "sandwich"}[mode.lower()]
    if mode == "exact":
        return _exact(X, kappa, **kw)
    if mode == "heuristic":
        return _heuristic(X, kappa, **kw)
    return _sandwich(X, kappa, **kw)


def obsdiam_grid_oracle(X: FiniteMMSpace, kappa: float, step: float = 1e-3) -> float:
    """Brute force over f on a grid of [0, diam X]^n (n <= 3), f(0) = 0 w.l.o.g."""
    n = X.n
    if n == 1 or kappa >= 1:
        return 0.0
    grid = np.arange(0.0, X.diameter + step / 2, step)
    best = 0.0
    if n == 2:
        # f = (0, s), |s| <= d
        for s in grid[grid <= X.dist[0, 1] + 1e-12]:
            best = max(best, observable_value(X, np.array([0.0, s]), kappa))
        return best
    if n != 3:
        raise InstanceTooLarge("obsdiam_grid_oracle", n, 3)
    full = np.concatenate([-grid[::-1], grid[1:]])
    d01, d02, d12 = X.dist[0, 1], X.dist[0, 2], X.dist[1, 2]
    # f = (0, s, u); the value only depends on the sorted triple and the masses
    s_vals = full[np.abs(full) <= d01 + 1e-12]
    u_vals = full[np.abs(full) <= d02 + 1e-12]
    S, U = np.meshgrid(s_vals, u_vals, indexing="ij")
    ok = np.abs(S - U) <= d12 + 1e-12
    S, U = S[ok], U[ok]
    F = np.stack([np.zeros_like(S), S, U], axis=1)
    order = np.argsort(F, axis=1, kind="stable")
    vals = np.take_along_axis(F, order, axis=1)
    w = X.weight[order]
    alpha = 1.0 - kappa
    spans = np.full(len(F), np.inf)
    cw = np.cumsum(w, axis=1)
    for a in range(3):
        for b in range(a, 3):
            m = cw[:, b] - (cw[:, a - 1] if a > 0 else 0.0)
            spans = np.where(m >= alpha - TAU_MASS, np.minimum(spans, vals[:, b] - vals[:, a]), spans)
    spans = np.where(np.isfinite(spans), spans, 0.0)
    return float(max(best, spans.max()))


# Levy radius


def levy_radius_of(X: FiniteMMSpace, f, kappa: float, tol=TAU_MASS) -> float:
    """Least rho with mu(|f - m_f| > rho) <= kappa, for one observable f."""
    _, m = median_levy_mean(pushforward(X, f))
    dev = np.abs(np.asarray(f, dtype=float) - m)
    order = np.argsort(-dev, kind="stable")
    cm = np.cumsum(X.weight[order])
    hit = np.flatnonzero(cm > kappa + tol)
    if hit.size == 0:
        return 0.0
    # the first sorted deviation whose upper set already has too much mass; ties share value
    return float(dev[order[hit[0]]])


def _lerad_exact(X, kappa, tol=TAU_MASS):
    from scipy.optimize import linprog

    n = X.n
    perms = _orderings(n)
    best, best_f = 0.0, np.zeros(n)
    Ub = []
    # Lipschitz rows f_i - f_j <= d_ij
    lip_rows, lip_rhs = [], []
    for i in range(n):
        for j in range(n):
            if i != j:
                r = np.zeros(n + 1)
                r[i], r[j] = 1.0, -1.0
                lip_rows.append(r)
                lip_rhs.append(X.dist[i, j])
    lip_rows, lip_rhs = np.array(lip_rows), np.array(lip_rhs)
    for perm in perms:
        w = X.weight[perm]
        c = np.cumsum(w)
        k = int(np.argmax(c >= 0.5 - tol))
        k2 = k + 1 if abs(c[k] - 0.5) <= tol and k + 1 < n else k
        pre = np.concatenate([[0.0], c])  # pre[q] = mass of positions < q
        # minimal tail pairs: positions < q below the median block, >= r above it
        pairs = []
        for q in range(0, (k + 2) if k2 == k + 1 else (k + 1)):
            for r in range(max(k2, k + 1) if k2 == k else k2, n + 1):
                if q == 0 and r == n:
                    continue
                m = pre[q] + (1.0 - pre[r])
                if m <= kappa + tol:
                    continue
                shrink_q = q > 0 and pre[q - 1] + (1.0 - pre[r]) > kappa + tol
                shrink_r = r < n and pre[q] + (1.0 - pre[r + 1]) > kappa + tol
                if not (shrink_q or shrink_r):
                    pairs.append((q, r))
        if not pairs:
            continue
        order_rows = []
        for p in range(n - 1):
            row = np.zeros(n + 1)
            row[perm[p]], row[perm[p + 1]] = 1.0, -1.0
            order_rows.append(row)
        base_A = np.vstack([lip_rows] + ([np.array(order_rows)] if order_rows else []))
        base_b = np.concatenate([lip_rhs, np.zeros(len(order_rows))])
        for q, r in pairs:
            rows = []
            if q > 0:
                row = np.zeros(n + 1)  # t - (m_f - f_(q-1)) <= 0
                row[perm[k]] -= 0.5
                row[perm[k2]] -= 0.5
                row[perm[q - 1]] += 1.0
                row[n] = 1.0
                rows.append(row)
            if r < n:
                row = np.zeros(n + 1)  # t - (f_(r) - m_f) <= 0
                row[perm[r]] -= 1.0
                row[perm[k]] += 0.5
                row[perm[k2]] += 0.5
                row[n] = 1.0
                rows.append(row)
            A = np.vstack([base_A, np.array(rows)])
            b = np.concatenate([base_b, np.zeros(len(rows))])
            obj = np.zeros(n + 1)
            obj[n] = -1.0
            bounds = [(None, None)] * n + [(0, None)]
            bounds[perm[0]] = (0, 0)
            res = linprog(obj, A_ub=A, b_ub=b, bounds=bounds, method="highs")
            if res.status == 0 and -res.fun > best + 1e-12:
                f = res.x[:n]
                val = levy_radius_of(X, f, kappa, tol)
                cand = max(val, 0.0)
                if cand > best:
                    best, best_f = cand, f
                if -res.fun > best + 1e-9:
                    # LP optimum not reproduced by the recomputation: keep the LP value
                    best, best_f = -res.fun, f
    return best, best_f


def levy_radius(X: FiniteMMSpace, kappa: float, exact_limit: int = LERAD_EXACT_LIMIT, seed: int = 0, restarts: int = 64):
    """LeRad(X; -kappa), returned as (IntervalBound, witness f)."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if kappa >= 1 or X.n == 1:
        return IntervalBound.exact(0.0), np.zeros(X.n)
    if X.n <= exact_limit:
        v, f = _lerad_exact(X, kappa)
        return IntervalBound.exact(v), f
    rng = np.random.default_rng(seed)
    best, best_f = 0.0, np.zeros(X.n)
    cands = [X.dist[i] for i in range(min(X.n, restarts // 2))]
    od = observable_diameter(X, kappa, mode="exact" if X.n <= EXACT_LIMIT else "sandwich")
    cands.append(od.witness)
    while len(cands) < restarts:
        cands.append(random_lipschitz(X, rng))
    for f in cands:
        v = levy_radius_of(X, f, kappa)
        if v > best:
            best, best_f = v, f
    upper = od.bound.upper if kappa < 0.5 else X.diameter
    return IntervalBound(best, max(best, upper), Kind.CERTIFIED), best_f
