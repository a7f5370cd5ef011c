"""Finite mm-spaces and the elementary constructions on them."""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.sparse.csgraph import csgraph_from_dense, floyd_warshall

from .errors import (
    AsymmetricMatrix,
    DegenerateDistance,
    DimensionMismatch,
    MassNotOne,
    NonFiniteValue,
    NonpositiveCap,
    NonpositiveScale,
    NonzeroDiagonal,
    ProductTooLarge,
    TriangleViolation,
    ZeroWeightPoint,
)

TAU_METRIC = 1e-9
TAU_MASS = 1e-9
TAU_EXACT = 1e-12

PRODUCT_LIMIT = 4096


class Kind(str, enum.Enum):
    EXACT = "exact"
    CERTIFIED = "certified"
    ESTIMATE = "estimate"


@dataclass(frozen=True)
class IntervalBound:
    """A value known to lie in ``[lower, upper]``.

    ``kind`` says how it was obtained; estimates also carry the sample
    count and the seed that produced them.
    """

    lower: float
    upper: float
    kind: Kind = Kind.EXACT
    samples: int | None = None
    seed: int | None = None

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if lo > hi:
            if lo - hi <= TAU_EXACT * max(1.0, abs(hi)):
                lo = hi
            else:
                raise ValueError(f"lower {lo} > upper {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.EXACT and hi - lo > TAU_EXACT * max(1.0, abs(hi)) and math.isfinite(hi):
            raise ValueError("exact bound with a nonzero width")

    @classmethod
    def exact(cls, value):
        return cls(value, value, Kind.EXACT)

    @property
    def value(self) -> float:
        if self.lower == self.upper:
            return self.lower
        if math.isinf(self.upper):
            return self.lower
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, x, tol=TAU_EXACT) -> bool:
        return self.lower - tol <= x <= self.upper + tol

    def as_dict(self) -> dict:
        d = {"value": self.value, "lower": self.lower, "upper": self.upper, "kind": self.kind.value}
        if self.samples is not None:
            d["samples"] = self.samples
        if self.seed is not None:
            d["seed"] = self.seed
        return d


class FiniteMMSpace:
    """Finite metric measure space.

    Build one through :func:`validate_space`; the constructor itself trusts
    its input (internal builders use it to skip the cubic triangle check).
    """

    __slots__ = ("labels", "dist", "weight")

    def __init__(self, labels, dist, weight):
        dist = np.array(dist, dtype=float)
        weight = np.array(weight, dtype=float)
        dist.setflags(write=False)
        weight.setflags(write=False)
        self.labels = tuple(labels)
        self.dist = dist
        self.weight = weight

    @property
    def n(self) -> int:
        return len(self.weight)

    def __len__(self):
        return len(self.weight)

    @property
    def diameter(self) -> float:
        return float(self.dist.max()) if self.n else 0.0

    def index(self, label) -> int:
        return self.labels.index(label)

    def subspace(self, idx, renormalize=True) -> "FiniteMMSpace":
        idx = np.asarray(idx, dtype=int)
        w = self.weight[idx]
        if renormalize:
            w = w / math.fsum(w)
        return FiniteMMSpace([self.labels[i] for i in idx], self.dist[np.ix_(idx, idx)], w)

    def with_weight(self, weight) -> "FiniteMMSpace":
        return validate_space(self.labels, self.dist, weight, check_metric=False)

    def __eq__(self, other):
        if not isinstance(other, FiniteMMSpace):
            return NotImplemented
        return (
            self.labels == other.labels
            and np.array_equal(self.dist, other.dist)
            and np.array_equal(self.weight, other.weight)
        )

    def __hash__(self):
        return hash((self.labels, self.dist.tobytes(), self.weight.tobytes()))

    def __repr__(self):
        return f"FiniteMMSpace(n={self.n}, diam={self.diameter:.6g})"


def triangle_excess(dist: np.ndarray):
    """Return (excess, k) where excess[i, j] = d(i,j) - min_k (d(i,k) + d(k,j)).

    Taking k = i shows excess >= 0. Only pairs whose shortest path is
    strictly shorter can be positive, so those are the ones recomputed
    (and given a witness k; elsewhere k is 0).
    """
    dist = np.asarray(dist, dtype=float)
    n = dist.shape[0]
    excess = np.zeros((n, n))
    arg = np.zeros((n, n), dtype=int)
    if n < 3:
        return excess, arg
    # explicit zeros are edges, not gaps
    sp = floyd_warshall(csgraph_from_dense(dist, null_value=np.inf), directed=True)
    for i, j in np.argwhere(sp < dist):
        via = dist[i, :] + dist[:, j]
        k = int(np.argmin(via))
        excess[i, j], arg[i, j] = dist[i, j] - via[k], k
    return excess, arg


def validate_space(labels, dist, weight, tol_metric=TAU_METRIC, tol_mass=TAU_MASS, check_metric=True):
    """Check the mm-space axioms and return a :class:`FiniteMMSpace`.

    Every violation found is collected; the first one is raised with the
    complete list attached as ``err.violations``.
    """
    dist = np.asarray(dist, dtype=float)
    weight = np.asarray(weight, dtype=float)
    if labels is None:
        labels = list(range(len(weight)))
    labels = list(labels)
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise DimensionMismatch(f"distance matrix must be square, got shape {dist.shape}")
    n = dist.shape[0]
    if weight.shape != (n,) or len(labels) != n:
        raise DimensionMismatch(f"{n}x{n} matrix with {weight.size} weights and {len(labels)} labels")
    if len(set(labels)) != n:
        raise DimensionMismatch("point labels must be distinct")
    if not np.all(np.isfinite(dist)):
        raise NonFiniteValue("dist")
    if not np.all(np.isfinite(weight)):
        raise NonFiniteValue("weight")

    violations = []
    scale = max(1.0, float(np.abs(dist).max()) if n else 1.0)
    tol_d = tol_metric * scale
    asym = np.abs(dist - dist.T)
    for i, j in zip(*np.nonzero(np.triu(asym > tol_d, 1))):
        violations.append(AsymmetricMatrix(labels[i], labels[j], float(asym[i, j])))
    diag = np.diag(dist)
    for i in np.nonzero(np.abs(diag) > tol_d)[0]:
        violations.append(NonzeroDiagonal(labels[i], float(diag[i])))
    for i, j in zip(*np.nonzero(np.triu(dist <= 0, 1))):
        violations.append(DegenerateDistance(labels[i], labels[j], float(dist[i, j])))
    if check_metric and n >= 3 and not violations:
        excess, via = triangle_excess(dist)
        bad = np.argwhere(np.triu(excess > tol_d, 1))
        order = np.argsort(-excess[bad[:, 0], bad[:, 1]], kind="stable") if len(bad) else []
        for i, j in bad[order]:
            k = via[i, j]
            violations.append(
                TriangleViolation(labels[i], labels[j], labels[k], float(excess[i, j]), indices=(int(i), int(j), int(k)))
            )
    for i in np.nonzero(weight <= 0)[0]:
        violations.append(ZeroWeightPoint(labels[i], float(weight[i])))
    total = math.fsum(weight)
    if abs(1.0 - total) > tol_mass:
        violations.append(MassNotOne(1.0 - total))
    if violations:
        err = violations[0]
        err.violations = violations
        raise err
    d = 0.5 * (dist + dist.T)
    np.fill_diagonal(d, 0.0)
    return FiniteMMSpace(labels, d, weight)


def strip_zero_weights(labels, dist, weight, tol=0.0):
    """Drop points of weight <= tol (the support of the measure) and validate."""
    weight = np.asarray(weight, dtype=float)
    keep = np.nonzero(weight > tol)[0]
    labels = list(range(len(weight))) if labels is None else list(labels)
    dist = np.asarray(dist, dtype=float)
    return validate_space([labels[i] for i in keep], dist[np.ix_(keep, keep)], weight[keep])


def scale_space(X: FiniteMMSpace, t: float) -> FiniteMMSpace:
    if not t > 0 or not math.isfinite(t):
        raise NonpositiveScale(f"scale factor must be positive, got {t}")
    return FiniteMMSpace(X.labels, X.dist * t, X.weight)


def truncate_space(X: FiniteMMSpace, D: float) -> FiniteMMSpace:
    if not D > 0:
        raise NonpositiveCap(f"cap must be positive, got {D}")
    return FiniteMMSpace(X.labels, np.minimum(X.dist, D), X.weight)


def lp_combine(a: np.ndarray, b: np.ndarray, p: float) -> np.ndarray:
    if math.isinf(p):
        return np.maximum(a, b)
    if p == 1:
        return a + b
    return (a**p + b**p) ** (1.0 / p)


def product_space(X: FiniteMMSpace, Y: FiniteMMSpace, p: float = math.inf, limit: int = PRODUCT_LIMIT) -> FiniteMMSpace:
    """l_p product of two finite mm-spaces with the product measure."""
    if p < 1:
        raise ValueError("p must be in [1, inf]")
    size = X.n * Y.n
    if size > limit:
        raise ProductTooLarge(size, limit)
    dx = np.repeat(np.repeat(X.dist, Y.n, axis=0), Y.n, axis=1)
    dy = np.tile(Y.dist, (X.n, X.n))
    labels = [(a, b) for a in X.labels for b in Y.labels]
    w = np.outer(X.weight, Y.weight).ravel()
    return FiniteMMSpace(labels, lp_combine(dx, dy, p), w)


def power_space(F: FiniteMMSpace, n: int, p: float = math.inf, limit: int = PRODUCT_LIMIT) -> FiniteMMSpace:
    """F^n with the l_p product metric; labels are n-tuples of labels of F."""
    if n < 1:
        raise ValueError("n must be >= 1")
    size = F.n**n
    if size > limit:
        raise ProductTooLarge(size, limit)
    idx = np.array(list(itertools.product(range(F.n), repeat=n)), dtype=int)
    D = np.zeros((len(idx), len(idx)))
    for c in range(n):
        col = F.dist[np.ix_(idx[:, c], idx[:, c])]
        if math.isinf(p):
            np.maximum(D, col, out=D)
        else:
            D += col**p
    if not math.isinf(p) and p != 1:
        D = D ** (1.0 / p)
    w = np.prod(F.weight[idx], axis=1)
    labels = [tuple(F.labels[i] for i in row) for row in idx]
    return FiniteMMSpace(labels, D, w)


# small named spaces used throughout the tests and the CLI


def point_space(label="p") -> FiniteMMSpace:
    return FiniteMMSpace([label], [[0.0]], [1.0])


def two_point_space(d: float = 1.0, w: float = 0.5, labels=("a", "b")) -> FiniteMMSpace:
    return validate_space(labels, [[0.0, d], [d, 0.0]], [1.0 - w, w])


def discrete_space(n: int, d: float = 1.0, weight=None) -> FiniteMMSpace:
    D = d * (1.0 - np.eye(n))
    w = np.full(n, 1.0 / n) if weight is None else weight
    return validate_space(range(n), D, w)


def line_space(xs, weight=None) -> FiniteMMSpace:
    xs = np.asarray(xs, dtype=float)
    w = np.full(len(xs), 1.0 / len(xs)) if weight is None else weight
    return validate_space(list(range(len(xs))), np.abs(xs[:, None] - xs[None, :]), w, check_metric=False)


def cycle_space(n: int, circumference: float = 2 * math.pi, weight=None) -> FiniteMMSpace:
    """n equally spaced points on a circle with the geodesic (arc) metric."""
    k = np.arange(n)
    steps = np.abs(k[:, None] - k[None, :])
    steps = np.minimum(steps, n - steps)
    w = np.full(n, 1.0 / n) if weight is None else weight
    return validate_space(list(range(n)), steps * (circumference / n), w, check_metric=False)


def euclidean_space(points, weight=None) -> FiniteMMSpace:
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    diff = P[:, None, :] - P[None, :, :]
    D = np.sqrt((diff**2).sum(-1))
    w = np.full(len(P), 1.0 / len(P)) if weight is None else weight
    return validate_space(list(range(len(P))), D, w, check_metric=False)


class LineMeasure:
    """Finitely many weighted atoms on the real line, positions increasing."""

    __slots__ = ("positions", "masses", "total")

    def __init__(self, positions, masses, total=None):
        pos = np.array(positions, dtype=float).ravel()
        m = np.array(masses, dtype=float).ravel()
        if pos.shape != m.shape:
            raise DimensionMismatch("positions and masses differ in length")
        if pos.size and np.any(np.diff(pos) <= 0):
            raise ValueError("atom positions must be strictly increasing")
        if np.any(m <= 0):
            raise ValueError("atom masses must be positive")
        s = math.fsum(m)
        if total is None:
            total = s
        elif abs(total - s) > TAU_MASS:
            raise MassNotOne(total - s)
        if not (0 < total <= 1 + TAU_MASS):
            raise ValueError(f"total mass must be in (0, 1], got {total}")
        pos.setflags(write=False)
        m.setflags(write=False)
        self.positions, self.masses, self.total = pos, m, float(total)

    @classmethod
    def from_values(cls, values, weights, tol=TAU_EXACT) -> "LineMeasure":
        values = np.asarray(values, dtype=float).ravel()
        weights = np.asarray(weights, dtype=float).ravel()
        if values.shape != weights.shape:
            raise DimensionMismatch("one value per point required")
        keep = weights > 0
        values, weights = values[keep], weights[keep]
        order = np.argsort(values, kind="stable")
        v, w = values[order], weights[order]
        if v.size == 0:
            raise ValueError("empty measure")
        scale = tol * max(1.0, float(np.abs(v).max()))
        # a new atom starts when the gap to the previous value exceeds the tolerance
        starts = np.concatenate([[0], np.nonzero(np.diff(v) > scale)[0] + 1])
        masses = np.array([math.fsum(w[a:b]) for a, b in zip(starts, list(starts[1:]) + [v.size])])
        return cls(v[starts], masses, total=math.fsum(masses))

    @property
    def atoms(self):
        return list(zip(self.positions.tolist(), self.masses.tolist()))

    def __len__(self):
        return self.positions.size

    def cdf(self, x):
        """Mass of (-inf, x]."""
        c = np.concatenate([[0.0], np.cumsum(self.masses)])
        return c[np.searchsorted(self.positions, x, side="right")]

    def __repr__(self):
        return f"LineMeasure({len(self)} atoms, total={self.total:.6g})"


def pushforward(X: FiniteMMSpace, f) -> LineMeasure:
    f = np.asarray(f, dtype=float).ravel()
    if f.size != X.n:
        raise DimensionMismatch(f"expected {X.n} values, got {f.size}")
    return LineMeasure.from_values(f, X.weight)


def median_levy_mean(nu: LineMeasure, tol=TAU_MASS):
    """Return ((a_f, b_f), m_f): the extreme medians and the Levy mean."""
    if abs(nu.total - 1.0) > tol:
        raise MassNotOne(1.0 - nu.total)
    c = np.cumsum(nu.masses)
    upper = 1.0 - np.concatenate([[0.0], c[:-1]])  # mass of [x_k, inf)
    k = int(np.argmax(c >= 0.5 - tol))
    j = int(np.nonzero(upper >= 0.5 - tol)[0][-1])
    a, b = float(nu.positions[k]), float(nu.positions[j])
    return (a, b), 0.5 * (a + b)


@dataclass(frozen=True)
class SubCoupling:
    plan: np.ndarray
    row_bound: np.ndarray
    col_bound: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.plan, dtype=float)
        if np.any(p < -TAU_MASS):
            raise ValueError("negative entry in transport plan")
        if np.any(p.sum(1) > np.asarray(self.row_bound) + TAU_MASS) or np.any(p.sum(0) > np.asarray(self.col_bound) + TAU_MASS):
            raise ValueError("plan exceeds its marginal bounds")
        if p.sum() > 1 + TAU_MASS:
            raise ValueError("plan has total mass > 1")

    @property
    def mass(self) -> float:
        return float(np.sum(self.plan))

    @property
    def deficiency(self) -> float:
        return 1.0 - self.mass


class Coarsening(NamedTuple):
    space: FiniteMMSpace
    bound: IntervalBound
    projection: np.ndarray  # index into space for every point of the original


def farthest_point_net(X: FiniteMMSpace, radius: float) -> list[int]:
    """Greedy net seeded at the heaviest point; every point ends within ``radius``."""
    seed = int(np.argmax(X.weight))
    net = [seed]
    near = X.dist[seed].copy()
    while True:
        far = int(np.argmax(near))
        if near[far] <= radius:
            return net
        net.append(far)
        np.minimum(near, X.dist[far], out=near)


def coarsen(X: FiniteMMSpace, eps: float) -> Coarsening:
    """Replace X by the nearest-point push-forward onto an eps/2-net.

    The bound on the box distance is 2 d_P(pi_* mu, mu), computed exactly
    inside X.
    """
    from .transport import prohorov_distance

    if not eps > 0:
        raise ValueError("eps must be positive")
    diam = X.diameter
    if eps >= diam:
        seed = int(np.argmax(X.weight))
        Y = point_space(X.labels[seed])
        # put the single point at distance diam/2 from all of X: d_P <= diam/2
        bound = min(1.0, diam)
        return Coarsening(Y, IntervalBound(0.0, bound, Kind.CERTIFIED), np.zeros(X.n, dtype=int))
    net = farthest_point_net(X, eps / 2)
    sub = X.dist[:, net]
    proj = np.argmin(sub, axis=1)  # argmin takes the first (lowest net index) on ties
    w = np.zeros(len(net))
    np.add.at(w, proj, X.weight)
    pushed = np.zeros(X.n)
    pushed[net] = w
    dp = prohorov_distance(X, pushed, X.weight).upper
    Y = FiniteMMSpace([X.labels[i] for i in net], X.dist[np.ix_(net, net)], w)
    return Coarsening(Y, IntervalBound(0.0, min(1.0, 2 * dp), Kind.CERTIFIED), proj)
