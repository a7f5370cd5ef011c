"""Separation distance Sep(X; k_0, ..., k_N).

Feasibility at a threshold delta means: some points can be put into bins
0..N (the rest unused) so that bin i has mass >= k_i and points in different
bins are >= delta apart. It is decided by a depth-first branch and bound over
the conflict graph {d < delta}; the answer is the largest feasible pairwise
distance.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from ..errors import InstanceTooLarge
from ..mmcore import TAU_EXACT, TAU_MASS, FiniteMMSpace, IntervalBound, Kind

EXACT_LIMIT = 18
NODE_BUDGET = 20_000
GREEDY_CENTERS = 400


class _MaskMass:
    """Weighted popcount of Python-int bitmasks through per-byte tables."""

    def __init__(self, w):
        n = len(w)
        self.nbytes = (n + 7) // 8
        self.tables = []
        for b in range(self.nbytes):
            chunk = np.zeros(8)
            seg = w[8 * b : 8 * b + 8]
            chunk[: len(seg)] = seg
            t = np.zeros(256)
            for bit in range(8):
                h = 1 << bit
                t[h : 2 * h] = t[:h] + chunk[bit]
            self.tables.append(t.tolist())

    def __call__(self, mask):
        s = 0.0
        tables = self.tables
        b = 0
        while mask:
            s += tables[b][mask & 255]
            mask >>= 8
            b += 1
        return s


def _search_order(conflict, w):
    """Components of the conflict graph by decreasing mass, BFS inside each."""
    n = len(w)
    seen = np.zeros(n, dtype=bool)
    comps = []
    for s in np.argsort(-w, kind="stable"):
        if seen[s]:
            continue
        comp, queue = [], [int(s)]
        seen[s] = True
        while queue:
            u = queue.pop(0)
            comp.append(u)
            nb = np.flatnonzero(conflict[u] & ~seen)
            nb = nb[np.argsort(-w[nb], kind="stable")]
            seen[nb] = True
            queue.extend(int(v) for v in nb)
        comps.append(comp)
    comps.sort(key=lambda c: -w[c].sum())
    return [u for c in comps for u in c]


def feasible_at(X: FiniteMMSpace, kappas, delta, budget=None, tol=TAU_MASS):
    """Decide Sep-feasibility at delta.

    Returns (True, labels) with labels[x] in {-1, 0..N}, (False, None), or
    (None, None) when the node budget runs out.
    """
    k = np.asarray(kappas, dtype=float)
    nb = k.size
    D = X.dist
    conflict = (D < delta) & ~np.eye(X.n, dtype=bool)
    order = _search_order(conflict, X.weight)
    pos_of = np.empty(X.n, dtype=int)
    pos_of[order] = np.arange(X.n)
    n = X.n
    w = X.weight[order].tolist()
    cmask = []
    for u in order:
        m = 0
        for v in np.flatnonzero(conflict[u]):
            m |= 1 << int(pos_of[v])
        cmask.append(m)
    mass = _MaskMass(np.asarray(w))
    full = (1 << n) - 1
    kap = k.tolist()
    # bins with the same demand are interchangeable: fill them in index order
    first_same = [min(j for j in range(nb) if abs(kap[j] - kap[i]) <= TAU_EXACT) for i in range(nb)]

    def viable(pos, masses, forb):
        rem = full ^ ((1 << pos) - 1)
        need_total = 0.0
        anywhere = 0
        for i in range(nb):
            need = kap[i] - masses[i]
            if need > tol:
                if masses[i] + mass(rem & ~forb[i]) < kap[i] - tol:
                    return False
                need_total += need
                anywhere |= rem & ~forb[i]
        return need_total <= mass(anywhere) + tol

    def options(pos, masses, forb):
        bit = 1 << pos
        opts = []
        for i in sorted(range(nb), key=lambda i: masses[i] - kap[i]):
            if masses[i] >= kap[i] - tol or forb[i] & bit:
                continue
            if masses[i] == 0.0:
                j0 = first_same[i]
                if any(masses[j] == 0.0 for j in range(j0, i) if first_same[j] == j0):
                    continue
            opts.append(i)
        opts.append(-1)
        return opts

    masses0 = [0.0] * nb
    forb0 = [0] * nb
    labels = [-1] * n
    if not viable(0, masses0, forb0):
        return False, None
    stack = [(0, masses0, forb0, options(0, masses0, forb0), 0)]
    nodes = 0
    while stack:
        pos, masses, forb, opts, idx = stack[-1]
        if idx >= len(opts):
            stack.pop()
            continue
        stack[-1] = (pos, masses, forb, opts, idx + 1)
        b = opts[idx]
        nodes += 1
        if budget is not None and nodes > budget:
            return None, None
        if b >= 0:
            m2 = masses.copy()
            m2[b] += w[pos]
            cm = cmask[pos]
            f2 = [f | cm if i != b else f for i, f in enumerate(forb)]
        else:
            m2, f2 = masses, forb
        labels[pos] = b
        if all(m2[i] >= kap[i] - tol for i in range(nb)):
            labels[pos + 1 :] = [-1] * (n - pos - 1)
            out = np.full(n, -1)
            out[order] = labels
            return True, out
        if pos + 1 < n and viable(pos + 1, m2, f2):
            stack.append((pos + 1, m2, f2, options(pos + 1, m2, f2), 0))
    return False, None


def min_cross_distance(X: FiniteMMSpace, labels) -> float:
    labels = np.asarray(labels)
    used = labels >= 0
    diff = used[:, None] & used[None, :] & (labels[:, None] != labels[None, :])
    if not diff.any():
        return math.inf
    return float(X.dist[diff].min())


def _bin_masses(X, labels, nb):
    return np.array([X.weight[labels == i].sum() for i in range(nb)])


# heuristics for large instances


def _farthest_fill(X, dfrom, need, tol):
    """Points sorted by decreasing ``dfrom`` until mass ``need``; returns (indices, min dfrom used)."""
    order = np.argsort(-dfrom, kind="stable")
    cm = np.cumsum(X.weight[order])
    k = int(np.argmax(cm >= need - tol)) if cm[-1] >= need - tol else -1
    if k < 0:
        return None, -math.inf
    return order[: k + 1], float(dfrom[order[k]])


def _greedy_two(X, k0, k1, tol, max_centers=None):
    """Cap heuristic for two bins: a small ball, then the farthest points from it."""
    n = X.n
    order = np.argsort(X.dist, axis=1, kind="stable")
    best, best_lab = -math.inf, None
    centers = range(n) if max_centers is None or n <= max_centers else np.linspace(0, n - 1, max_centers).astype(int)
    for first, second in ((k0, k1), (k1, k0)):
        cm = np.cumsum(X.weight[order], axis=1)
        kk = np.argmax(cm >= first - tol, axis=1)
        for c in centers:
            A = order[c, : kk[c] + 1]
            dA = X.dist[A].min(axis=0)
            B, delta = _farthest_fill(X, np.where(np.isin(np.arange(n), A), -math.inf, dA), second, tol)
            if B is None:
                continue
            for _ in range(2):  # alternate: rebuild A as the farthest points from B
                dB = X.dist[B].min(axis=0)
                A2, d2 = _farthest_fill(X, np.where(np.isin(np.arange(n), B), -math.inf, dB), first, tol)
                if A2 is None or d2 <= delta:
                    break
                A, delta = A2, d2
                dA = X.dist[A].min(axis=0)
                B2, d3 = _farthest_fill(X, np.where(np.isin(np.arange(n), A), -math.inf, dA), second, tol)
                if B2 is None or d3 <= delta:
                    break
                B, delta = B2, d3
            if delta > best:
                lab = np.full(n, -1)
                i0, i1 = (0, 1) if first == k0 else (1, 0)
                lab[A] = i0
                lab[B] = i1
                best, best_lab = min_cross_distance(X, lab), lab
    return best, best_lab


def _greedy_at(X, kappas, delta, starts, tol):
    n = X.n
    bins = np.argsort(-np.asarray(kappas), kind="stable")
    for s in starts:
        lab = np.full(n, -1)
        near = np.zeros(n, dtype=bool)  # within < delta of some assigned point
        dmin = np.full(n, math.inf)
        ok = True
        for rank, b in enumerate(bins):
            free = (lab < 0) & ~near
            if not free.any():
                ok = False
                break
            c = s if rank == 0 and free[s] else int(np.argmax(np.where(free, dmin, -math.inf)))
            cand = np.flatnonzero(free)
            cand = cand[np.argsort(X.dist[c, cand], kind="stable")]
            cm = np.cumsum(X.weight[cand])
            if cm[-1] < kappas[b] - tol:
                ok = False
                break
            take = cand[: int(np.argmax(cm >= kappas[b] - tol)) + 1]
            lab[take] = b
            near |= (X.dist[take] < delta).any(axis=0)
            dmin = np.minimum(dmin, X.dist[take].min(axis=0))
        if ok:
            return lab
    return None


def _relaxation_ok(X, kappas, delta, tol):
    """Necessary condition: a point of bin i sees all other bins outside U_delta(x)."""
    k = np.asarray(kappas, dtype=float)
    outside = 1.0 - (X.weight[None, :] * (X.dist < delta)).sum(axis=1)
    for i in range(k.size):
        others = k.sum() - k[i]
        S = outside >= others - tol
        if X.weight[S].sum() < k[i] - tol:
            return False
    return True


def uniform_cycle_step(X: FiniteMMSpace):
    """Spacing h if X is n equally weighted, equally spaced points on a circle in label order."""
    n = X.n
    if n < 3 or np.ptp(X.weight) > TAU_EXACT:
        return None
    h = X.dist[0, 1]
    k = np.arange(n)
    steps = np.abs(k[:, None] - k[None, :])
    steps = np.minimum(steps, n - steps)
    if np.allclose(X.dist, steps * h, rtol=1e-12, atol=1e-12 * max(1.0, h)):
        return float(h)
    return None


def _sep_uniform_cycle(X, kappas, h, tol):
    n = X.n
    need = [int(math.ceil(kk * n - tol * n)) for kk in kappas]
    need = [max(1, c) for c in need]
    nb = len(need)
    best = 0
    for j in range(1, n // 2 + 1):
        if sum(need) + nb * (j - 1) <= n:
            best = j
    if best == 0:
        return 0.0, None
    lab = np.full(n, -1)
    p = 0
    for i, c in enumerate(need):
        lab[p : p + c] = i
        p += c + best - 1
    return float(X.dist[0, best] if best < n else best * h), lab


def separation_distance(
    X: FiniteMMSpace,
    kappas,
    exact_limit: int = EXACT_LIMIT,
    node_budget: int = NODE_BUDGET,
    strict: bool = False,
    return_witness: bool = False,
    tol: float = TAU_MASS,
    greedy_centers: int = GREEDY_CENTERS,
):
    """Sep(X; kappas) as an :class:`IntervalBound`.

    Exact up to ``exact_limit`` points (and for larger instances when the
    search finishes inside ``node_budget``). Otherwise a certified interval:
    the lower end comes from explicit separated sets and the upper end from a
    mass relaxation; ``greedy_centers`` bounds the effort of the first.
    With ``strict`` an oversize instance raises
    :class:`InstanceTooLarge` instead.

    With ``return_witness`` also returns bin labels (-1 for unused points).
    """
    kap = np.asarray(kappas, dtype=float).ravel()
    if kap.size < 2 or np.any(kap <= 0):
        raise ValueError("need at least two positive masses")
    n = X.n

    def done(bound, lab=None):
        return (bound, lab) if return_witness else bound

    if kap.sum() > 1 + tol or kap.size > n:
        return done(IntervalBound.exact(0.0))
    h = uniform_cycle_step(X)
    if h is not None:
        val, lab = _sep_uniform_cycle(X, kap, h, tol)
        return done(IntervalBound.exact(val), lab)

    cands = np.unique(X.dist[np.triu_indices(n, 1)])
    large = n > exact_limit
    if large and strict:
        raise InstanceTooLarge("separation_distance", n, exact_limit)
    budget = node_budget if large else None

    # indices into cands: lo feasible (or -1), hi the first index known or assumed infeasible
    lo, hi, lo_lab = -1, len(cands), None
    if large:
        if kap.size == 2:
            g, glab = _greedy_two(X, kap[0], kap[1], tol, max_centers=greedy_centers)
        else:
            g, glab = -math.inf, None
            starts = list(np.argsort(-X.weight)[:4]) + list(np.linspace(0, n - 1, 6).astype(int))
            a, b = 0, len(cands) - 1
            while a <= b:
                mid = (a + b) // 2
                lab = _greedy_at(X, kap, cands[mid], starts, tol)
                if lab is not None:
                    g, glab = min_cross_distance(X, lab), lab
                    a = mid + 1
                else:
                    b = mid - 1
        if glab is not None:
            lo = int(np.searchsorted(cands, g + TAU_EXACT * max(1.0, g), side="right")) - 1
            lo_lab = glab
        a, b = lo + 1, len(cands) - 1
        while a <= b:  # largest candidate passing the relaxation
            mid = (a + b) // 2
            if _relaxation_ok(X, kap, cands[mid], tol):
                a = mid + 1
            else:
                b = mid - 1
        hi = a
    unknown = False
    while hi - lo > 1:
        mid = (lo + hi) // 2
        ok, lab = feasible_at(X, kap, cands[mid], budget=budget, tol=tol)
        if ok is None:
            unknown = True
            break
        if ok:
            lo, lo_lab = mid, lab
        else:
            hi = mid
    lower = float(cands[lo]) if lo >= 0 else 0.0
    if lo_lab is not None:
        lower = min_cross_distance(X, lo_lab)
    if not unknown:
        return done(IntervalBound.exact(lower), lo_lab)
    upper = float(cands[hi - 1]) if hi >= 1 else 0.0
    return done(IntervalBound(lower, max(lower, upper), Kind.CERTIFIED), lo_lab)


def sep_by_labelings(X: FiniteMMSpace, kappas, tol=TAU_MASS) -> float:
    """Brute force over all (N+2)^n assignments; small instances only."""
    kap = np.asarray(kappas, dtype=float)
    nb = kap.size
    n = X.n
    if (nb + 1) ** n > 5_000_000:
        raise InstanceTooLarge("sep_by_labelings", n, 8)
    L = np.array(list(itertools.product(range(-1, nb), repeat=n)), dtype=int)
    masses = np.stack([(L == i) @ X.weight for i in range(nb)], axis=1)
    valid = np.all(masses >= kap - tol, axis=1)
    if not valid.any():
        return 0.0
    L = L[valid]
    best = np.full(len(L), np.inf)
    for i, j in itertools.combinations(range(n), 2):
        cross = (L[:, i] >= 0) & (L[:, j] >= 0) & (L[:, i] != L[:, j])
        best = np.where(cross, np.minimum(best, X.dist[i, j]), best)
    return float(best.max())
