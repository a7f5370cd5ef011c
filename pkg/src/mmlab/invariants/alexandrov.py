"""Quadruple comparison-angle test for lower curvature bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ..errors import PerimeterViolation
from ..mmcore import FiniteMMSpace

TAU_ANGLE = 1e-9


@dataclass
class AlexandrovReport:
    perimeter_ok: bool
    worst_quadruple: tuple | None  # (x0, x1, x2, x3)
    angle_sum: float
    passes: bool

    def as_dict(self):
        return {
            "perimeterOK": self.perimeter_ok,
            "worstQuadruple": None if self.worst_quadruple is None else [list(self.worst_quadruple), self.angle_sum],
            "passes": self.passes,
        }


def comparison_angles(dist: np.ndarray, curv: float) -> np.ndarray:
    """A[o, i, j]: angle at o of the model triangle with sides d(o,i), d(o,j), d(i,j)."""
    D = np.asarray(dist, dtype=float)
    a = D[:, :, None]
    b = D[:, None, :]
    c = D[None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        if curv == 0:
            cos = (a * a + b * b - c * c) / (2 * a * b)
        elif curv > 0:
            k = math.sqrt(curv)
            sa, sb = np.sin(k * a), np.sin(k * b)
            cos = (np.cos(k * c) - np.cos(k * a) * np.cos(k * b)) / (sa * sb)
            # a side of length pi/sqrt(curv) leaves the angle free; take the smallest
            free = (np.abs(sa) < 1e-12) | (np.abs(sb) < 1e-12)
            cos = np.where(free, 1.0, cos)
        else:
            k = math.sqrt(-curv)
            cos = (np.cosh(k * a) * np.cosh(k * b) - np.cosh(k * c)) / (np.sinh(k * a) * np.sinh(k * b))
    cos = np.where(np.isfinite(cos), cos, 1.0)
    return np.arccos(np.clip(cos, -1.0, 1.0))


def alexandrov_check(X: FiniteMMSpace, curv: float, strict: bool = False, tol=TAU_ANGLE) -> AlexandrovReport:
    """Check the perimeter condition (curv > 0) and every quadruple angle sum against 2 pi.

    With strict=True a perimeter violation raises PerimeterViolation.
    """
    n = X.n
    D = X.dist
    if curv > 0:
        limit = 2 * math.pi / math.sqrt(curv)
        for i, j, k in combinations(range(n), 3):
            per = D[i, j] + D[j, k] + D[i, k]
            if per > limit * (1 + tol):
                if strict:
                    raise PerimeterViolation((X.labels[i], X.labels[j], X.labels[k]), per, limit)
                return AlexandrovReport(False, None, math.nan, False)
    if n < 4:
        return AlexandrovReport(True, None, 0.0, True)
    A = comparison_angles(D, curv)
    tri = np.array(list(combinations(range(n), 3)))
    i, j, k = tri[:, 0], tri[:, 1], tri[:, 2]
    S = A[:, i, j] + A[:, j, k] + A[:, k, i]  # shape (n, #triples)
    o = np.arange(n)[:, None]
    S[(o == i) | (o == j) | (o == k)] = -np.inf
    flat = int(np.argmax(S))
    x0, t = divmod(flat, tri.shape[0])
    worst = float(S[x0, t])
    return AlexandrovReport(True, (x0, *map(int, tri[t])), worst, worst <= 2 * math.pi + tol)
