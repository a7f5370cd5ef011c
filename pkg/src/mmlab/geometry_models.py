"""Sphere and Gaussian models: samplers, projections and special functions.

Sampling is chunked. Chunk j draws from the j-th child of
``SeedSequence(seed)``, so a sample depends only on (seed, m) and never on
how the work is split.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, betaincinv

from .errors import InstanceTooLarge, MissingAmbientCoordinates, OutOfRange
from .mmcore import FiniteMMSpace, LineMeasure

CHUNK = 4096
DENSE_LIMIT = 20_000


@dataclass(frozen=True)
class SphereSpec:
    n: int
    r: float = 1.0
    metric: str = "geodesic"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("sphere dimension must be >= 1")
        if not self.r > 0:
            raise ValueError("radius must be positive")
        if self.metric not in ("geodesic", "chordal"):
            raise ValueError(f"metric must be geodesic or chordal, not {self.metric!r}")


class PointCloud:
    """Uniformly weighted sample with its ambient coordinates.

    The distance matrix is built on first use of :attr:`space`.
    """

    def __init__(self, coords, metric="euclidean", radius=None, seed=None):
        self.coords = np.asarray(coords, dtype=float)
        self.metric = metric
        self.radius = radius
        self.seed = seed
        self._space = None

    @property
    def m(self) -> int:
        return self.coords.shape[0]

    def distances(self, idx=None) -> np.ndarray:
        P = self.coords
        Q = P if idx is None else P[np.atleast_1d(idx)]
        if self.metric == "linf":
            return np.max(np.abs(Q[:, None, :] - P[None, :, :]), axis=2)
        G = Q @ P.T
        if self.metric == "geodesic":
            r2 = self.radius * self.radius
            D = self.radius * np.arccos(np.clip(G / r2, -1.0, 1.0))
        else:
            sq = np.sum(Q * Q, axis=1)[:, None] + np.sum(P * P, axis=1)[None, :] - 2 * G
            D = np.sqrt(np.maximum(sq, 0.0))
        if idx is None:
            D = 0.5 * (D + D.T)
            np.fill_diagonal(D, 0.0)
        return D

    @property
    def space(self) -> FiniteMMSpace:
        if self._space is None:
            if self.m > DENSE_LIMIT:
                raise InstanceTooLarge("dense distance matrix", self.m, DENSE_LIMIT)
            self._space = FiniteMMSpace(list(range(self.m)), self.distances(), np.full(self.m, 1.0 / self.m))
        return self._space


def _chunks(m, seed):
    kids = np.random.SeedSequence(seed).spawn((m + CHUNK - 1) // CHUNK)
    for j, ss in enumerate(kids):
        yield np.random.default_rng(ss), min(CHUNK, m - j * CHUNK)


def _sphere_chunks(n, r, m, seed):
    for rng, size in _chunks(m, seed):
        g = rng.standard_normal((size, n + 1))
        yield r * g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_sphere(spec: SphereSpec, m: int, seed: int) -> PointCloud:
    """m i.i.d. uniform points on S^n(r), as normalised Gaussian vectors."""
    if m < 1:
        raise ValueError("m must be >= 1")
    coords = np.concatenate(list(_sphere_chunks(spec.n, spec.r, m, seed)))
    metric = "geodesic" if spec.metric == "geodesic" else "euclidean"
    return PointCloud(coords, metric, spec.r, seed)


def sample_gaussian(k: int, m: int, seed: int) -> PointCloud:
    """m i.i.d. standard normal points of R^k with Euclidean distances."""
    if m < 1:
        raise ValueError("m must be >= 1")
    coords = np.concatenate([rng.standard_normal((size, k)) for rng, size in _chunks(m, seed)])
    return PointCloud(coords, "euclidean", None, seed)


def project_pushforward(sample, k: int):
    """Push a sphere sample forward by the first-k-coordinates projection.

    k = 1 gives a :class:`LineMeasure`; larger k a cloud in R^k with l_inf.
    """
    coords = getattr(sample, "coords", None)
    if coords is None:
        raise MissingAmbientCoordinates("projection needs a sample that kept its ambient coordinates")
    if not 1 <= k <= coords.shape[1]:
        raise ValueError(f"k must lie in [1, {coords.shape[1]}]")
    if k == 1:
        x = coords[:, 0]
        return LineMeasure.from_values(x, np.full(x.size, 1.0 / x.size))
    return PointCloud(coords[:, :k].copy(), "linf", None, getattr(sample, "seed", None))


def sphere_projection_sample(n: int, m: int, seed: int, k: int = 1, r=None) -> np.ndarray:
    """First k coordinates of ``sample_sphere(SphereSpec(n, r), m, seed)`` without keeping the rest.

    r defaults to sqrt(n).
    """
    r = math.sqrt(n) if r is None else r
    return np.concatenate([c[:, :k] for c in _sphere_chunks(n, r, m, seed)])


def mb_density(x, n: int, k: int = 1) -> np.ndarray:
    """Density of the k-dimensional projection of the uniform law on S^n(sqrt n) in R^(n+1).

    Proportional to (n - |x|^2)^((n-k-1)/2) on the ball |x| <= sqrt n.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float).T).T if k > 1 else np.asarray(x, dtype=float)
    sq = x * x if k == 1 else np.sum(x * x, axis=-1)
    a = (n - k - 1) / 2
    logz = (k / 2) * math.log(math.pi) + (a + k / 2) * math.log(n) + math.lgamma(a + 1) - math.lgamma(a + k / 2 + 1)
    inside = sq < n
    out = np.zeros(np.shape(sq))
    out[inside] = np.exp(a * np.log(n - sq[inside]) - logz)
    return out


def gaussian_density(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)


# special functions


def _half_cap(n, r):
    """v(r) for 0 <= r <= pi/2: with x = sin^2 t the integral is an incomplete beta function."""
    return 0.5 * float(betainc(n / 2, 0.5, math.sin(r) ** 2))


def sphere_ball_volume(n: int, r: float) -> float:
    """v(r): normalised volume of a geodesic ball of radius r in S^n(1)."""
    if n < 1:
        raise OutOfRange("dimension must be >= 1")
    if not (-1e-15 <= r <= math.pi + 1e-15):
        raise OutOfRange(f"radius {r} outside [0, pi]")
    r = min(max(r, 0.0), math.pi)
    if r > math.pi / 2:
        return 1.0 - _half_cap(n, math.pi - r)
    return _half_cap(n, r)


def _log_density(n, r):
    """log of v'(r) = sin^(n-1) r / B(n/2, 1/2)."""
    return (n - 1) * math.log(math.sin(r)) - (math.lgamma(n / 2) + math.lgamma(0.5) - math.lgamma(n / 2 + 0.5))


def v_inv(n: int, s: float) -> float:
    """Inverse of r -> v(r) on [0, pi]; incomplete-beta inverse polished by Newton on log v."""
    if not 0.0 <= s <= 1.0:
        raise OutOfRange(f"{s} outside [0, 1]")
    if s in (0.0, 1.0):
        return 0.0 if s == 0.0 else math.pi
    if s > 0.5:
        return math.pi - v_inv(n, 1.0 - s)
    x = float(betaincinv(n / 2, 0.5, 2 * s))
    r = math.asin(math.sqrt(min(max(x, 0.0), 1.0)))
    for _ in range(3):
        val = _half_cap(n, r)
        if val <= 0 or r <= 0:
            break
        step = (math.log(val) - math.log(s)) * val / math.exp(_log_density(n, r))
        if not math.isfinite(step) or abs(step) < 1e-16:
            break
        r = min(max(r - step, 0.0), math.pi / 2)
    return r


def gaussian_interval(r: float) -> float:
    """I(r) = gamma^1[0, r]."""
    if r < 0:
        raise OutOfRange("r must be >= 0")
    return 0.5 * math.erf(min(r, 40.0) / math.sqrt(2))


def gaussian_interval_inv(s: float, tol: float = 1e-15) -> float:
    """Inverse of I on [0, 1/2), Newton with a bisection fallback."""
    if not 0.0 <= s < 0.5:
        raise OutOfRange(f"{s} outside [0, 1/2)")
    if s == 0.0:
        return 0.0
    lo, hi = 0.0, 40.0
    r = 1.0
    for _ in range(200):
        g = gaussian_interval(r) - s
        if g > 0:
            hi = r
        else:
            lo = r
        if abs(g) <= tol or hi - lo < 1e-15:
            break
        dens = math.exp(-0.5 * r * r) / math.sqrt(2 * math.pi)
        step = r - g / dens if dens > 0 else -1.0
        r = step if lo < step < hi else 0.5 * (lo + hi)
    return r


def gaussian_tail(r: float) -> float:
    """gamma^1[r, inf)."""
    return 0.5 * math.erfc(r / math.sqrt(2))


def gaussian_tail_check(r: float) -> dict:
    if r < 0:
        raise OutOfRange("r must be >= 0")
    tail = gaussian_tail(r)
    bound = 0.5 * math.exp(-0.5 * r * r)
    return {"r": r, "tail": tail, "bound": bound, "holds": tail <= bound * (1 + 1e-12)}


def sphere_sep_model(n: int, kappa: float) -> float:
    """pi - 2 v^(-1)(kappa/2): the two-cap separation on S^n(1) at masses kappa/2."""
    return math.pi - 2 * v_inv(n, kappa / 2)


def sphere_sep_upper_chain(n: int, kappa: float) -> float:
    """(2 sqrt 2 / sqrt(n-1)) sqrt(-log(sqrt(2/pi) kappa))."""
    return 2 * math.sqrt(2) / math.sqrt(n - 1) * math.sqrt(-math.log(math.sqrt(2 / math.pi) * kappa))


def cap_separation_estimate(cloud: PointCloud, kappa0: float, kappa1: float, centers=None) -> float:
    """Average over centres x of the gap between the kappa0- and (1-kappa1)-quantiles of d(x, .).

    For each x the sets {d(x,.) <= q_lo} and {d(x,.) >= q_hi} are kappa0- and
    kappa1-heavy and at least q_hi - q_lo apart, so each term is an
    attainable separation within the sample.
    """
    m = cloud.m
    idx = np.arange(m) if centers is None else np.asarray(centers)
    D = cloud.distances(idx) if cloud._space is None else cloud.space.dist[idx]
    S = np.sort(D, axis=1)
    lo = S[:, max(0, math.ceil(kappa0 * m - 1e-9) - 1)]
    hi = S[:, m - max(1, math.ceil(kappa1 * m - 1e-9))]
    return float(np.mean(np.maximum(hi - lo, 0.0)))
