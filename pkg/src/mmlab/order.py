"""Relations between two finite mm-spaces.

Lipschitz domination and mm-isomorphism are decided by backtracking. The
Gromov-Prohorov distance is bracketed: upper bounds come from explicit
metrics on the disjoint union (bridges of length c along a relation R with
c >= dis(R)/2, re-validated by a triangle check), lower bounds from the
partial-diameter comparison of the half-scaled spaces.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _subsets
from ._flows import bipartite_maxflow
from .errors import InstanceTooLarge
from .invariants.obsdiam import random_lipschitz
from .mmcore import TAU_EXACT, TAU_MASS, TAU_METRIC, FiniteMMSpace, IntervalBound, Kind, LineMeasure, triangle_excess
from .transport import _prohorov_from_cands, line_prohorov_distance, mass_deficit

DOMINATION_LIMIT = 14
DOMINATION_BUDGET = 2_000_000
MATRIX_LIMIT = 10**6


# Lipschitz order


@dataclass
class Domination:
    answer: bool | None  # None: search budget ran out
    witness: list | None  # f as a list of Y-indices, one per X-point
    certificate: str = ""
    nodes: int = 0

    def __bool__(self):
        return bool(self.answer)


def lipschitz_dominates(X: FiniteMMSpace, Y: FiniteMMSpace, budget=DOMINATION_BUDGET, tol=TAU_MASS) -> Domination:
    """Decide X > Y: is there a 1-Lipschitz f: X -> Y with f_* mu_X = mu_Y?"""
    if X.n > DOMINATION_LIMIT:
        return Domination(None, None, f"|X| = {X.n} exceeds {DOMINATION_LIMIT}")
    if Y.n > X.n:
        return Domination(False, None, "Y has more points than X, no surjection exists")
    if Y.diameter > X.diameter * (1 + TAU_METRIC) + TAU_METRIC:
        return Domination(False, None, "diam Y > diam X")
    order = np.argsort(-X.weight, kind="stable")
    wx = X.weight[order]
    DX = X.dist[np.ix_(order, order)]
    DY = Y.dist
    dtol = TAU_METRIC * max(1.0, X.diameter)
    left = Y.weight.astype(float).copy()
    tail = np.concatenate([np.cumsum(wx[::-1])[::-1], [0.0]])
    assign = np.full(X.n, -1)
    nodes = 0
    over = False

    def rec(p):
        nonlocal nodes, over
        if p == X.n:
            return bool(np.all(np.abs(left) <= tol * Y.n))
        nodes += 1
        if nodes > budget:
            over = True
            return False
        # every y must still be reachable: unmet demand needs remaining supply
        if np.sum(np.maximum(left, 0.0)) > tail[p] + tol:
            return False
        prev = assign[:p]
        for y in range(Y.n):
            if left[y] < wx[p] - tol:
                continue
            if p and np.any(DY[y, prev] > DX[p, :p] + dtol):
                continue
            assign[p] = y
            left[y] -= wx[p]
            if rec(p + 1):
                return True
            left[y] += wx[p]
            assign[p] = -1
            if over:
                return False
        return False

    found = rec(0)
    if found:
        f = np.empty(X.n, dtype=int)
        f[order] = assign
        return Domination(True, f.tolist(), "", nodes)
    if over:
        return Domination(None, None, f"search budget of {budget} nodes exhausted", nodes)
    return Domination(False, None, f"exhaustive search over {nodes} nodes found no map", nodes)


def check_domination_map(X: FiniteMMSpace, Y: FiniteMMSpace, f, tol=TAU_MASS) -> bool:
    f = np.asarray(f, dtype=int)
    pushed = np.zeros(Y.n)
    np.add.at(pushed, f, X.weight)
    lip = np.all(Y.dist[np.ix_(f, f)] <= X.dist + TAU_METRIC * max(1.0, X.diameter))
    return bool(lip and np.allclose(pushed, Y.weight, atol=tol * max(1, Y.n), rtol=0))


# mm-isomorphism


@dataclass
class Isomorphism:
    answer: bool
    permutation: list | None  # Y-index for each X-point
    reason: str = ""


def _row_signatures(X: FiniteMMSpace, tol):
    rows = np.sort(X.dist, axis=1)
    return np.column_stack([X.weight, rows])


def mm_isomorphic(X: FiniteMMSpace, Y: FiniteMMSpace, tol=TAU_METRIC) -> Isomorphism:
    """Search for a weight- and distance-preserving bijection X -> Y."""
    if X.n != Y.n:
        return Isomorphism(False, None, f"support sizes differ ({X.n} vs {Y.n})")
    n = X.n
    scale = max(1.0, X.diameter, Y.diameter)
    dt = tol * scale
    if not np.allclose(np.sort(X.weight), np.sort(Y.weight), atol=TAU_MASS, rtol=0):
        return Isomorphism(False, None, "weight multisets differ")
    if not np.allclose(np.sort(X.dist.ravel()), np.sort(Y.dist.ravel()), atol=dt, rtol=0):
        return Isomorphism(False, None, "distance multisets differ")
    sx, sy = _row_signatures(X, tol), _row_signatures(Y, tol)
    cand = [
        [y for y in range(n) if abs(sx[x, 0] - sy[y, 0]) <= TAU_MASS and np.all(np.abs(sx[x, 1:] - sy[y, 1:]) <= dt)]
        for x in range(n)
    ]
    if any(not c for c in cand):
        x = next(i for i, c in enumerate(cand) if not c)
        return Isomorphism(False, None, f"no point of Y matches the weight and sorted row of {X.labels[x]!r}")
    order = sorted(range(n), key=lambda x: len(cand[x]))
    perm = [-1] * n
    used = [False] * n

    def rec(p):
        if p == n:
            return True
        x = order[p]
        for y in cand[x]:
            if used[y]:
                continue
            if all(abs(X.dist[x, order[q]] - Y.dist[y, perm[order[q]]]) <= dt for q in range(p)):
                perm[x] = y
                used[y] = True
                if rec(p + 1):
                    return True
                used[y] = False
                perm[x] = -1
        return False

    if rec(0):
        return Isomorphism(True, perm, "")
    return Isomorphism(False, None, "invariants agree but backtracking found no isometry")


# distance matrix distributions


@dataclass
class MatrixDistribution:
    order: int
    atoms: list  # (N x N matrix, probability)

    def same_as(self, other: "MatrixDistribution", tol=TAU_EXACT, tol_mass=TAU_MASS) -> bool:
        if self.order != other.order or len(self.atoms) != len(other.atoms):
            return False
        for (a, p), (b, q) in zip(self.atoms, other.atoms):
            if abs(p - q) > tol_mass or np.max(np.abs(a - b), initial=0.0) > tol * max(1.0, np.abs(a).max(initial=0.0)):
                return False
        return True


def _merge_atoms(keys, probs, N, tol):
    """Sort matrices (as upper-triangle vectors) and merge neighbours within tol."""
    if keys.shape[1] == 0:
        return [(np.zeros((N, N)), float(math.fsum(probs)))]
    order = np.lexsort(keys.T[::-1])
    keys, probs = keys[order], probs[order]
    iu = np.triu_indices(N, 1)
    atoms = []
    rep, acc = keys[0], [probs[0]]
    for k in range(1, len(keys)):
        if np.max(np.abs(keys[k] - rep)) <= tol * max(1.0, np.abs(rep).max()):
            acc.append(probs[k])
            continue
        atoms.append((rep, math.fsum(acc)))
        rep, acc = keys[k], [probs[k]]
    atoms.append((rep, math.fsum(acc)))
    out = []
    for key, p in atoms:
        M = np.zeros((N, N))
        M[iu] = key
        out.append((M + M.T, p))
    return out


def distance_matrix_distribution(X: FiniteMMSpace, N: int, mode: str = "exact", count: int = 10_000, seed: int = 0, tol=TAU_EXACT) -> MatrixDistribution:
    """Law of (d(x_i, x_j))_{ij} with x_1..x_N drawn i.i.d. from mu_X."""
    if not 1 <= N <= 3:
        raise ValueError("N must be 1, 2 or 3")
    iu = np.triu_indices(N, 1)
    if mode == "exact":
        size = X.n**N
        if size > MATRIX_LIMIT:
            raise InstanceTooLarge("matrix distribution", size, MATRIX_LIMIT)
        tuples = np.array(list(itertools.product(range(X.n), repeat=N)), dtype=int).reshape(-1, N)
        probs = np.prod(X.weight[tuples], axis=1)
    elif mode == "sample":
        rng = np.random.default_rng(seed)
        tuples = rng.choice(X.n, size=(count, N), p=X.weight)
        probs = np.full(count, 1.0 / count)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    keys = X.dist[tuples[:, iu[0]], tuples[:, iu[1]]]
    return MatrixDistribution(N, _merge_atoms(keys, probs, N, tol))


# Gromov-Prohorov bounds


@dataclass(frozen=True)
class Correspondence:
    relation: tuple  # pairs (x, y)
    distortion: float

    @classmethod
    def from_pairs(cls, X: FiniteMMSpace, Y: FiniteMMSpace, pairs):
        pairs = tuple(sorted({(int(a), int(b)) for a, b in pairs}))
        if not pairs:
            raise ValueError("a correspondence needs at least one pair")
        return cls(pairs, relation_distortion(X, Y, pairs))


def relation_distortion(X, Y, pairs) -> float:
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    return float(np.max(np.abs(X.dist[np.ix_(a, a)] - Y.dist[np.ix_(b, b)])))


def bridge_metric(X: FiniteMMSpace, Y: FiniteMMSpace, pairs, c: float) -> np.ndarray:
    """Cross block d(x, y) = min over (a, b) in R of d_X(x, a) + c + d_Y(b, y)."""
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    return np.min(X.dist[:, a][:, :, None] + c + Y.dist[b, :][None, :, :], axis=1)


def union_matrix(X, Y, cross):
    return np.block([[X.dist, cross], [cross.T, Y.dist]])


def is_extension_metric(X, Y, cross, tol=TAU_METRIC) -> bool:
    if np.any(cross < 0):
        return False
    U = union_matrix(X, Y, cross)
    excess, _ = triangle_excess(U)
    return bool(excess.max() <= tol * max(1.0, U.max()))


def cross_prohorov(cross, mu, nu) -> float:
    """Prohorov distance between mu (rows) and nu (columns) given their cross distances."""
    cands = np.unique(np.concatenate([[0.0], cross.ravel()]))
    tol = TAU_EXACT * max(1.0, float(cands[-1]))
    memo = {}

    def gap(k):
        if k not in memo:
            memo[k] = mass_deficit(bipartite_maxflow(mu, nu, cross <= cands[k] + tol)[0])
        return memo[k]

    return min(1.0, _prohorov_from_cands(cands, gap)[0])


def _diam_profile(X: FiniteMMSpace):
    """Steps (m_j, D_j): diam(X; alpha) = D_j for alpha in (m_{j-1}, m_j]."""
    mass = _subsets.subset_sums(X.weight)[1:]
    diam = _subsets.subset_diameters(X.dist)[1:]
    order = np.argsort(mass, kind="stable")
    m, d = mass[order], diam[order]
    best = np.minimum.accumulate(d[::-1])[::-1]  # min diameter over mass >= m
    levels, idx = np.unique(np.round(m / TAU_MASS) * TAU_MASS, return_index=True)
    return m[idx], best[idx]


def diam_box_lower(X: FiniteMMSpace, Y: FiniteMMSpace, limit=16) -> float:
    """Largest delta with diam(Y; 1-e-delta) > diam(X; 1-e) + delta for some e > 0 (both orders).

    Any such delta is a lower bound for the box distance.
    """
    if max(X.n, Y.n) > limit:
        return 0.0
    best = 0.0
    for A, B in ((X, Y), (Y, X)):
        la, va = _diam_profile(A)
        lb, vb = _diam_profile(B)
        # within one step of A's profile the smallest e is best
        for i in range(len(la)):
            e = 1.0 - la[i]
            c = float(va[i])
            # alpha = 1 - e - delta runs through the steps of B's profile
            for j in range(len(lb)):
                lo_alpha = lb[j - 1] if j else 0.0
                hi_delta = min(1.0 - e - lo_alpha, float(vb[j]) - c)
                if hi_delta > max(0.0, 1.0 - e - lb[j]) and hi_delta > best:
                    best = hi_delta
    return min(best, 1.0)


@dataclass
class GPBounds:
    dgp: IntervalBound
    box: IntervalBound
    relation: Correspondence | None
    bridge: float
    matrix_gap: float  # diagnostic only, never used as a bound
    exhausted: bool = False
    evaluated: int = 0
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "dGP": self.dgp.as_dict(),
            "box": self.box.as_dict(),
            "relation": None if self.relation is None else [list(p) for p in self.relation.relation],
            "bridge": self.bridge,
            "matrixGapDiagnostic": self.matrix_gap,
            "budgetExhausted": self.exhausted,
        }


def _maps(nx, ny, budget, rng):
    total = ny**nx
    if total <= budget:
        return np.array(list(itertools.product(range(ny), repeat=nx)), dtype=int).reshape(-1, nx), False
    return rng.integers(0, ny, size=(int(budget), nx)), True


def _map_scores(A, B, maps):
    dis = np.max(np.abs(A.dist[None, :, :] - B.dist[maps[:, :, None], maps[:, None, :]]), axis=(1, 2))
    pushed = np.zeros((len(maps), B.n))
    rows = np.repeat(np.arange(len(maps)), A.n)
    np.add.at(pushed, (rows, maps.ravel()), np.tile(A.weight, len(maps)))
    matched = np.minimum(pushed, B.weight[None, :]).sum(axis=1)
    return np.maximum(dis / 2, 1.0 - matched), dis


def gromov_prohorov_bounds(X: FiniteMMSpace, Y: FiniteMMSpace, budget: float = 1e6, hints=(), top: int = 24, seed: int = 0) -> GPBounds:
    """Certified bracket for d_GP(X, Y) and the implied bracket for the box distance.

    ``hints`` may hold extra relations (lists of (x, y) pairs) to try, e.g.
    the projection returned by coarsening.
    """
    rng = np.random.default_rng(seed)
    per_side = max(1, int(budget) // 2)
    tried = []  # (cheap bound, pairs)
    exhausted = False
    for A, B, flip in ((X, Y, False), (Y, X, True)):
        maps, trunc = _maps(A.n, B.n, per_side, rng)
        exhausted |= trunc
        chunk = max(1, int(4e6 // max(1, A.n * A.n)))
        for s in range(0, len(maps), chunk):
            mp = maps[s : s + chunk]
            score, _ = _map_scores(A, B, mp)
            keep = np.argsort(score, kind="stable")[:top]
            for k in keep:
                pairs = [(i, int(mp[k, i])) for i in range(A.n)]
                if flip:
                    pairs = [(b, a) for a, b in pairs]
                tried.append((float(score[k]), pairs))
    for x in range(X.n):
        for y in range(Y.n):
            tried.append((1.0, [(x, y)]))
    for h in hints:
        tried.append((0.0, [tuple(p) for p in h]))
    tried.sort(key=lambda t: t[0])

    best, best_rel, best_c = 1.0, None, math.nan
    seen = set()
    evaluated = 0
    for _, pairs in tried:
        key = tuple(sorted(pairs))
        if key in seen:
            continue
        seen.add(key)
        if len(seen) > 3 * top + X.n * Y.n + len(hints):
            break
        rel = Correspondence.from_pairs(X, Y, pairs)
        c = rel.distortion / 2
        cross = bridge_metric(X, Y, rel.relation, c)
        if not is_extension_metric(X, Y, cross):
            continue
        evaluated += 1
        v = cross_prohorov(cross, X.weight, Y.weight)
        if v < best:
            best, best_rel, best_c = v, rel, c
    lower = max(diam_box_lower(_half(X), _half(Y)), 0.5 * diam_box_lower(X, Y))
    lower = min(lower, best)
    dgp = IntervalBound(lower, best, Kind.EXACT if lower == best else Kind.CERTIFIED)
    box_lo = max(lower, diam_box_lower(X, Y))
    box = IntervalBound(min(box_lo, 1.0), min(1.0, 2 * best), Kind.CERTIFIED)
    return GPBounds(dgp, box, best_rel, best_c, matrix_gap(X, Y), exhausted, evaluated)


def _half(X):
    return FiniteMMSpace(X.labels, X.dist / 2, X.weight)


def matrix_gap(X: FiniteMMSpace, Y: FiniteMMSpace) -> float:
    """Prohorov distance between the laws of d(x, x') under mu x mu and nu x nu."""
    a = LineMeasure.from_values(X.dist.ravel(), np.outer(X.weight, X.weight).ravel())
    b = LineMeasure.from_values(Y.dist.ravel(), np.outer(Y.weight, Y.weight).ravel())
    return float(line_prohorov_distance(a, b))


# concentration distance bounds


def _mcshane(X: FiniteMMSpace, g):
    """Largest 1-Lipschitz function below g."""
    return np.min(np.asarray(g)[None, :] + X.dist, axis=1)


def _measurement(X: FiniteMMSpace, F):
    """Push-forward of mu_X by F: X -> (R^N, l_inf), centred, as (points, weights)."""
    F = F - X.weight @ F
    return F, X.weight


def _linf_cross(P, Q):
    return np.max(np.abs(P[:, None, :] - Q[None, :, :]), axis=2)


def _sample_maps(X, N, count, rng):
    out = []
    for j in range(X.n):
        out.append(np.repeat(X.dist[:, j : j + 1], N, axis=1))
    while len(out) < count:
        out.append(np.column_stack([random_lipschitz(X, rng) for _ in range(N)]))
    return out


def dconc_bounds(X: FiniteMMSpace, Y: FiniteMMSpace, N: int = 1, samples: int = 1000, seed: int = 0, gp: GPBounds | None = None) -> dict:
    """Bracket d_conc(X, Y).

    The upper end is the certified box bound. The lower end estimates the
    Hausdorff gap between the N-measurements (push-forwards by 1-Lipschitz
    maps into l_inf^N) from sampled maps, divided by N; it is an estimate.
    """
    if not 1 <= N <= 3:
        raise ValueError("N must be 1, 2 or 3")
    if gp is None:
        gp = gromov_prohorov_bounds(X, Y)
    upper = gp.box.upper
    rng = np.random.default_rng(seed)
    FX = _sample_maps(X, N, samples, rng)
    FY = _sample_maps(Y, N, samples, rng)
    # maps pulled back through the best relation, so each side sees the other's observables
    rel = gp.relation
    if rel is not None:
        fx = _relation_map(X.n, rel.relation, 0)
        fy = _relation_map(Y.n, rel.relation, 1)
        FX_extra = [np.column_stack([_mcshane(X, G[fx, k]) for k in range(N)]) for G in FY] if fx is not None else []
        FY_extra = [np.column_stack([_mcshane(Y, G[fy, k]) for k in range(N)]) for G in FX] if fy is not None else []
        FX += FX_extra
        FY += FY_extra
    MX = [_measurement(X, F) for F in FX]
    MY = [_measurement(Y, F) for F in FY]
    gap = max(_directed_gap(MX, MY), _directed_gap(MY, MX))
    # sampled clouds can overstate the gap; the certified upper end caps the estimate
    raw = gap / N
    lower = min(raw, upper)
    return {
        "lower": lower,
        "rawLower": raw,
        "upper": upper,
        "lowerKind": Kind.ESTIMATE.value,
        "upperKind": Kind.CERTIFIED.value,
        "samples": samples,
        "seed": seed,
    }


def _relation_map(n, pairs, side):
    """A map from one side to the other read off the relation, if it covers every point."""
    m = {}
    for p in pairs:
        m.setdefault(p[side], p[1 - side])
    if len(m) < n:
        return None
    return np.array([m[i] for i in range(n)])


def _directed_gap(A, B, probe=16, refine=32):
    """max over a in A of min over b in B of d_P(a, b), l_inf ground metric."""
    Q = np.stack([m[0] for m in B])  # (K, nB, N)
    q = [m[1] for m in B]
    ranked, first = [], []
    for P, p in A:
        # screen: support-to-support gap, small when b's atoms sit on a's atoms
        d = np.max(np.abs(P[None, :, None, :] - Q[:, None, :, :]), axis=3)
        scores = d.min(axis=2).max(axis=1) + d.min(axis=1).max(axis=1)
        cand = np.argsort(scores, kind="stable")
        ranked.append(cand)
        first.append(cross_prohorov(d[cand[0]], p, q[cand[0]]))
    worst = 0.0
    for i in np.argsort(first, kind="stable")[::-1][:refine]:
        P, p = A[i]
        best = first[i]
        for k in ranked[i][1:probe]:
            if best <= worst:
                break
            best = min(best, cross_prohorov(_linf_cross(P, Q[k]), p, q[k]))
        worst = max(worst, best)
    return worst
