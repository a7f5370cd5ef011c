"""Small dense network-flow kernels on bipartite graphs with real capacities."""
from __future__ import annotations

import numpy as np

EPS = 1e-15


def bipartite_maxflow(supply, demand, allowed, eps=EPS):
    """Maximum flow from ``supply`` (left) to ``demand`` (right).

    Edges ``allowed[i, j]`` have unbounded capacity. Augmenting paths are
    found by a breadth-first search that handles a whole layer at once.
    Returns (value, flow matrix).
    """
    a = np.array(supply, dtype=float)
    b = np.array(demand, dtype=float)
    allowed = np.asarray(allowed, dtype=bool)
    n, m = allowed.shape
    F = np.zeros((n, m))
    # greedy start: most of the flow is usually found here
    for i in range(n):
        if a[i] <= eps:
            continue
        for j in np.flatnonzero(allowed[i] & (b > eps)):
            d = min(a[i], b[j])
            F[i, j] += d
            a[i] -= d
            b[j] -= d
            if a[i] <= eps:
                break

    while True:
        roots = np.flatnonzero(a > eps)
        if roots.size == 0 or not np.any(b > eps):
            break
        seen_x = np.zeros(n, dtype=bool)
        seen_y = np.zeros(m, dtype=bool)
        par_x = np.full(n, -1)  # y from which x was reached (-1 for a root)
        par_y = np.full(m, -1)
        seen_x[roots] = True
        frontier = roots
        hit = -1
        while frontier.size:
            sub = allowed[frontier] & ~seen_y
            ys = np.flatnonzero(sub.any(0))
            if ys.size == 0:
                break
            par_y[ys] = frontier[np.argmax(sub[:, ys], axis=0)]
            seen_y[ys] = True
            open_ys = ys[b[ys] > eps]
            if open_ys.size:
                hit = int(open_ys[0])
                break
            back = (F[:, ys] > eps) & ~seen_x[:, None]
            xs = np.flatnonzero(back.any(1))
            par_x[xs] = ys[np.argmax(back[xs], axis=1)]
            seen_x[xs] = True
            frontier = xs
        if hit < 0:
            break
        # walk back to the root collecting forward (x, y) and backward (x, y') edges
        fwd, bwd = [], []
        y = hit
        while True:
            x = int(par_y[y])
            fwd.append((x, y))
            yb = int(par_x[x])
            if yb < 0:
                break
            bwd.append((x, yb))
            y = yb
        delta = min(b[hit], a[x])
        for xb, yb in bwd:
            delta = min(delta, F[xb, yb])
        if delta <= eps:
            break
        for xf, yf in fwd:
            F[xf, yf] += delta
        for xb, yb in bwd:
            F[xb, yb] -= delta
        a[x] -= delta
        b[hit] -= delta
    np.maximum(F, 0.0, out=F)
    return float(F.sum()), F


def transport_ssp(mu, nu, cost, eps=1e-14):
    """Balanced min-cost transportation by successive shortest paths.

    Shortest paths are computed with a vectorised Bellman-Ford on the
    residual graph. Returns (total cost, plan, u, v) where (u, v) are dual
    potentials: u_i + v_j <= cost_ij, with equality on the support.
    """
    a = np.array(mu, dtype=float)
    b = np.array(nu, dtype=float)
    C = np.asarray(cost, dtype=float)
    n, m = C.shape
    P = np.zeros((n, m))
    big = np.inf
    for _ in range(4 * (n + m) * max(n, m) + 10):
        src = a > eps
        if not src.any() or not (b > eps).any():
            break
        dx = np.where(src, 0.0, big)
        dy = np.full(m, big)
        px = np.full(n, -1)
        py = np.full(m, -1)
        for _it in range(n + m + 2):
            cand = dx[:, None] + C
            j_best = np.argmin(cand, axis=0)
            ny = cand[j_best, np.arange(m)]
            upd_y = ny < dy - 1e-15
            dy = np.where(upd_y, ny, dy)
            py = np.where(upd_y, j_best, py)
            back = np.where(P > eps, dy[None, :] - C, big)
            i_best = np.argmin(back, axis=1)
            nx = back[np.arange(n), i_best]
            upd_x = nx < dx - 1e-15
            dx = np.where(upd_x, nx, dx)
            px = np.where(upd_x, i_best, px)
            if not (upd_x.any() or upd_y.any()):
                break
        sinks = np.flatnonzero(b > eps)
        t = int(sinks[np.argmin(dy[sinks])])
        if not np.isfinite(dy[t]):
            break
        path_f, path_b = [], []
        y = t
        while True:
            x = int(py[y])
            path_f.append((x, y))
            if px[x] < 0:
                break
            yb = int(px[x])
            path_b.append((x, yb))
            y = yb
            if len(path_f) > n + m:
                raise RuntimeError("cycle while tracing augmenting path")
        delta = min(a[x], b[t])
        for xb, yb in path_b:
            delta = min(delta, P[xb, yb])
        for xf, yf in path_f:
            P[xf, yf] += delta
        for xb, yb in path_b:
            P[xb, yb] -= delta
        a[x] -= delta
        b[t] -= delta
    np.maximum(P, 0.0, out=P)
    u, v = transport_potentials(P, C)
    return float(np.sum(P * C)), P, u, v


def transport_potentials(P, C, eps=1e-14):
    """Dual potentials of an optimal plan from shortest paths in its residual graph."""
    n, m = C.shape
    # residual graph: x -> y with cost C (always), y -> x with cost -C where P > 0.
    dx = np.zeros(n)
    dy = np.zeros(m)
    for _ in range(n + m + 2):
        ny = np.minimum(dy, (dx[:, None] + C).min(axis=0))
        back = np.where(P > eps, ny[None, :] - C, np.inf)
        nx = np.minimum(dx, back.min(axis=1))
        if np.array_equal(nx, dx) and np.array_equal(ny, dy):
            break
        dx, dy = nx, ny
    # u_i = -dx_i, v_j = dy_j  gives  u_i + v_j <= C_ij, tight on the support
    return -dx, dy


def bellman_ford_potentials(W, eps=0.0):
    """Shortest distances from a virtual source joined to every node by 0.

    ``W[i, j]`` is the length of edge i -> j (``inf`` for no edge). Returns
    (distances, has_negative_cycle).
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    d = np.zeros(n)
    for _ in range(n + 1):
        nd = np.minimum(d, (d[:, None] + W).min(axis=0))
        if np.all(nd >= d - eps):
            return nd, False
        d = nd
    return d, True


def min_plus(A, B):
    """Min-plus matrix product, batched over leading axes."""
    return (A[..., :, :, None] + B[..., None, :, :]).min(axis=-2)


def floyd_warshall(W):
    """All-pairs shortest paths, batched over leading axes."""
    D = np.array(W, dtype=float, copy=True)
    n = D.shape[-1]
    for k in range(n):
        np.minimum(D, D[..., :, k, None] + D[..., None, k, :], out=D)
    return D
