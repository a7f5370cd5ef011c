"""Slow reference computations used only by the tests."""
import itertools
import math

import numpy as np
from scipy.optimize import linprog

TOL = 1e-9


def sep_labelings(D, w, kappas):
    """Sep by trying every assignment of points to N+1 bins or to 'unused'."""
    n = len(w)
    N1 = len(kappas)
    L = np.array(list(itertools.product(range(N1 + 1), repeat=n)), dtype=np.int8).reshape(-1, n)
    ok = np.ones(len(L), dtype=bool)
    for i, k in enumerate(kappas):
        ok &= (L == i) @ w >= k - TOL
    L = L[ok]
    if not len(L):
        return 0.0
    gap = np.full(len(L), np.inf)
    for i in range(N1):
        for j in range(i + 1, N1):
            g = np.full(len(L), np.inf)
            for u in range(n):
                for v in range(n):
                    if u != v:
                        hit = (L[:, u] == i) & (L[:, v] == j)
                        g = np.where(hit, np.minimum(g, D[u, v]), g)
            gap = np.minimum(gap, g)
    return float(gap.max())


def obsdiam_orderings(D, w, kappa):
    """ObsDiam by one LP per ordering of the points (up to reversal)."""
    n = len(w)
    if kappa >= 1 or n == 1:
        return 0.0
    alpha = 1.0 - kappa
    best = 0.0
    for perm in itertools.permutations(range(n)):
        if perm[0] > perm[-1]:
            continue
        cw = np.concatenate([[0.0], np.cumsum(w[list(perm)])])
        rows, rhs = [], []
        # variables f_0..f_{n-1}, t ; maximise t
        for i in range(n - 1):
            r = np.zeros(n + 1)
            r[perm[i]], r[perm[i + 1]] = 1, -1
            rows.append(r)
            rhs.append(0.0)
        for u in range(n):
            for v in range(n):
                if u != v:
                    r = np.zeros(n + 1)
                    r[u], r[v] = 1, -1
                    rows.append(r)
                    rhs.append(D[u, v])
        for a in range(n):
            for b in range(a, n):
                if cw[b + 1] - cw[a] >= alpha - TOL:
                    r = np.zeros(n + 1)
                    r[n], r[perm[b]], r[perm[a]] = 1, -1, 1
                    rows.append(r)
                    rhs.append(0.0)
        c = np.zeros(n + 1)
        c[n] = -1
        bounds = [(0, 0) if i == perm[0] else (None, None) for i in range(n)] + [(0, D.max())]
        res = linprog(c, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=bounds, method="highs")
        if res.status == 0:
            best = max(best, -res.fun)
    return best


def prohorov_subsets(D, mu, nu):
    """Definitional d_P over every subset A and closed balls.

    On [r, next distance) the balls are fixed, so the smallest admissible eps
    there is max(r, max_A nu(A) - mu(B_r(A))); larger balls only help.
    """
    n = len(mu)
    S = np.array(list(itertools.product((0, 1), repeat=n)), dtype=float)[1:]
    nuA = S @ nu
    best = 1.0
    for r in sorted(set(D.ravel().tolist())):
        if r >= best:
            break
        ball = (S @ (D <= r + 1e-12)) > 0
        need = float(np.max(nuA - ball @ mu))
        best = min(best, max(r, need))
    return best


def gp_metric_grid(dy, step=1e-2):
    """d_GP between a 1-point space and the 2-point space (d, w) with weights (1-w, w).

    Every extension metric on the 3-point union is given by s = d(p, a) and
    u = d(p, b). For each grid point d_P(delta_p, nu) is found by bisecting
    the definition (all subsets A, closed balls).
    """
    d, w = dy
    g = np.arange(0, d + 1 + step / 2, step)
    S, U = np.meshgrid(g, g, indexing="ij")
    ok = (np.abs(S - U) <= d + 1e-12) & (d <= S + U + 1e-12)
    S, U = S[ok], U[ok]
    D = np.zeros((S.size, 3, 3))
    D[:, 0, 1] = D[:, 1, 0] = S
    D[:, 0, 2] = D[:, 2, 0] = U
    D[:, 1, 2] = D[:, 2, 1] = d
    mu = np.array([1.0, 0, 0])
    nu = np.array([0, 1 - w, w])
    subsets = [list(A) for r in range(1, 4) for A in itertools.combinations(range(3), r)]

    def feasible(eps):
        good = np.ones(S.size, dtype=bool)
        for A in subsets:
            ball = np.any(D[:, A, :] <= eps[:, None, None] + 1e-12, axis=1)
            good &= ball @ mu >= nu[A].sum() - eps - 1e-12
        return good

    lo, hi = np.zeros(S.size), np.ones(S.size)
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        f = feasible(mid)
        hi = np.where(f, mid, hi)
        lo = np.where(f, lo, mid)
    return float(hi.min())
