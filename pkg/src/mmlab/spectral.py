"""Graph energies on finite mm-spaces and their low spectrum.

The generalized problem L f = lambda M f (L the weighted Laplacian, M the
vertex masses) is reduced to the symmetric matrix M^{-1/2} L M^{-1/2} and
diagonalised with cyclic Jacobi rotations.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DisconnectedWarning
from .invariants.concentration import expansion_coefficient
from .invariants.separation import separation_distance
from .mmcore import FiniteMMSpace, cycle_space, product_space

ZERO_EIGEN = 1e-10


@dataclass(frozen=True)
class EnergyGraph:
    space: FiniteMMSpace
    edges: tuple  # (i, j, conductance)

    def __post_init__(self):
        edges = tuple((int(i), int(j), float(c)) for i, j, c in self.edges)
        for i, j, c in edges:
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if not (0 <= i < self.space.n and 0 <= j < self.space.n):
                raise DimensionMismatch(f"edge ({i}, {j}) outside a {self.space.n}-vertex graph")
            if not (math.isfinite(c) and c >= 0):
                raise ValueError(f"conductance of edge ({i}, {j}) must be finite and >= 0")
        object.__setattr__(self, "edges", edges)

    @property
    def vertex_mass(self):
        return self.space.weight

    def laplacian(self) -> np.ndarray:
        n = self.space.n
        L = np.zeros((n, n))
        for i, j, c in self.edges:
            L[i, j] -= c
            L[j, i] -= c
            L[i, i] += c
            L[j, j] += c
        return L

    def energy(self, u) -> float:
        u = np.asarray(u, dtype=float)
        return float(sum(c * (u[i] - u[j]) ** 2 for i, j, c in self.edges))

    def rayleigh(self, u) -> float:
        u = np.asarray(u, dtype=float)
        return self.energy(u) / float(self.vertex_mass @ (u * u))


def jacobi_eigh(A, tol=1e-14, max_sweeps=100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (values, vectors) sorted ascending, vectors as columns.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    scale = max(np.abs(A).max(), 1e-300)
    for _ in range(max_sweeps):
        off = math.sqrt(max(0.0, float(np.sum(A * A) - np.sum(np.diag(A) ** 2))))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    vals = np.diag(A).copy()
    order = np.argsort(vals, kind="stable")
    return vals[order], V[:, order]


def eigenpairs(g: EnergyGraph):
    """All generalized eigenpairs (values ascending, M-orthonormal vectors)."""
    m = g.vertex_mass
    s = 1 / np.sqrt(m)
    vals, U = jacobi_eigh(s[:, None] * g.laplacian() * s[None, :])
    vals = np.where(np.abs(vals) < 1e-12 * max(1.0, np.abs(vals).max()), 0.0, vals)
    return vals, s[:, None] * U


def eigenvalues(g: EnergyGraph, k: int) -> np.ndarray:
    """The k+1 smallest eigenvalues lambda_0 <= ... <= lambda_k."""
    if not 0 <= k < g.space.n:
        raise ValueError(f"k must lie in [0, {g.space.n - 1}]")
    vals, _ = eigenpairs(g)
    if g.space.n > 1 and vals[1] < ZERO_EIGEN:
        comps = int(np.sum(vals < ZERO_EIGEN))
        warnings.warn(DisconnectedWarning(f"lambda_1 = {vals[1]:.3g}: graph has {comps} components"), stacklevel=2)
    return vals[: k + 1]


def cycle_graph(n: int, circumference: float = 2 * math.pi) -> EnergyGraph:
    """C_n with uniform mass and conductance mass/length^2 on every edge."""
    X = cycle_space(n, circumference)
    h = circumference / n
    c = (1.0 / n) / h**2
    return EnergyGraph(X, tuple((i, (i + 1) % n, c) for i in range(n)) if n > 2 else ((0, 1, c),) if n == 2 else ())


def cycle_spectrum(n: int, circumference: float = 2 * math.pi) -> np.ndarray:
    """Closed form 2c(1 - cos(2 pi j / n)) / m, sorted."""
    h = circumference / n
    m = 1.0 / n
    c = m / h**2
    return np.sort(2 * c * (1 - np.cos(2 * math.pi * np.arange(n) / n)) / m)


def product_graph(g: EnergyGraph, h: EnergyGraph, p: float = 2.0) -> EnergyGraph:
    """Cartesian product: each edge of one factor is copied, weighted by the other's mass."""
    X, Y = g.space, h.space
    P = product_space(X, Y, p=p)
    ny = Y.n
    edges = []
    for i, j, c in g.edges:
        for y in range(ny):
            edges.append((i * ny + y, j * ny + y, c * Y.weight[y]))
    for i, j, c in h.edges:
        for x in range(X.n):
            edges.append((x * ny + i, x * ny + j, c * X.weight[x]))
    return EnergyGraph(P, tuple(edges))


def lamk_sep_report(g: EnergyGraph, kappas, **sep_kw) -> dict:
    """Compare lambda_k Sep^2 against 4 / min kappa, with k + 1 = number of masses."""
    kap = [float(k) for k in kappas]
    k = len(kap) - 1
    n = g.space.n
    sep = separation_distance(g.space, kap, **sep_kw)
    if k >= n:
        lam = math.inf
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DisconnectedWarning)
            lam = float(eigenvalues(g, k)[k])
    s = sep.upper
    lhs = lam * s * s if s > 0 else 0.0
    rhs = 4 / min(kap)
    bound = 2 / math.sqrt(lam * min(kap)) if lam > ZERO_EIGEN else math.inf
    return {
        "k": k,
        "lambda_k": lam,
        "sep": sep.as_dict(),
        "lhs": lhs,
        "rhs": rhs,
        "sepBound": bound,
        "holds": bool(s <= bound * (1 + 1e-9)),
    }


def exp_lam1_report(g: EnergyGraph, kappa: float, rho: float) -> dict:
    """Compare Exp(X; kappa, rho) with min(1 + lambda_1 rho^2 / 4, 2)."""
    if kappa > 0.25:
        raise ValueError("kappa must be <= 1/4")
    if g.space.n > 1:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DisconnectedWarning)
            lam = float(eigenvalues(g, 1)[1])
    else:
        lam = 0.0
    ex = expansion_coefficient(g.space, kappa, rho)
    bound = min(1 + lam * rho * rho / 4, 2.0)
    return {
        "lambda_1": lam,
        "exp": ex.as_dict(),
        "bound": bound,
        "holds": bool(ex.lower >= bound - 1e-9),
    }
