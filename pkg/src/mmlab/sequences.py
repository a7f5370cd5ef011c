"""Finite-window diagnostics for sequences of mm-spaces.

An asymptotic property can only be read off a finite list, so every verdict
here looks at the last ``window`` elements and may come back inconclusive.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .invariants.concentration import expansion_coefficient
from .invariants.obsdiam import observable_diameter
from .invariants.separation import separation_distance
from .mmcore import FiniteMMSpace

WINDOW = 5
HEURISTIC_NOTE = "finite-window verdict; the property is asymptotic and is not proven by this report"


@dataclass
class SpaceSequence:
    spaces: list
    index: list = field(default_factory=list)

    def __post_init__(self):
        if not self.spaces:
            raise ValueError("a sequence needs at least one space")
        if not self.index:
            self.index = list(range(1, len(self.spaces) + 1))
        if len(self.index) != len(self.spaces):
            raise ValueError("index and spaces differ in length")

    def __len__(self):
        return len(self.spaces)

    def __iter__(self):
        return iter(zip(self.index, self.spaces))


def pmap(fn, items, threads=1):
    """Ordered map; with threads > 1 the calls run on a thread pool."""
    items = list(items)
    if threads is None or threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=int(threads)) as ex:
        return list(ex.map(fn, items))


def _nonincreasing(v, tol=1e-9):
    return all(b <= a + tol for a, b in zip(v, v[1:]))


def _nondecreasing(v, tol=1e-9):
    return all(b >= a - tol for a, b in zip(v, v[1:]))


def tail_verdict(lowers, uppers, window=WINDOW, ratio=0.25, tol=1e-9) -> str:
    """'vanishing' if the tail uppers fall and end below ratio * the largest upper,
    'persistent' if the tail lowers rise and stay positive, else 'inconclusive'."""
    lo = list(lowers)[-window:]
    up = list(uppers)[-window:]
    peak = max(uppers) if len(uppers) else 0.0
    if peak <= tol or (_nonincreasing(up, tol) and up[-1] <= ratio * peak + tol):
        return "vanishing"
    if _nondecreasing(lo, tol) and lo[-1] > tol:
        return "persistent"
    return "inconclusive"


def levy_profile(seq: SpaceSequence, kappas, window=WINDOW, ratio=0.25, threads=1, **sep_kw) -> dict:
    """Sandwich-mode ObsDiam series for each kappa and a tail verdict."""
    series = {}
    verdicts = {}
    for kappa in kappas:

        def one(item, kappa=kappa):
            idx, X = item
            b = observable_diameter(X, kappa, mode="sandwich", **sep_kw).bound
            return {"index": idx, "lower": b.lower, "upper": b.upper, "kind": b.kind.value}

        rows = pmap(one, seq, threads)
        series[kappa] = rows
        verdicts[kappa] = tail_verdict([r["lower"] for r in rows], [r["upper"] for r in rows], window, ratio)
    if all(v == "vanishing" for v in verdicts.values()):
        verdict = "consistent-with-Levy"
    elif any(v == "persistent" for v in verdicts.values()):
        verdict = "not-Levy"
    else:
        verdict = "inconclusive"
    return {"series": series, "perKappa": verdicts, "verdict": verdict, "note": HEURISTIC_NOTE}


def k_levy_check(seq: SpaceSequence, k: int, kappa_tuples, window=WINDOW, ratio=0.25, threads=1, **sep_kw) -> dict:
    """Sep series for every (k+1)-tuple of masses and a tail verdict per tuple."""
    series = {}
    verdicts = {}
    for kap in kappa_tuples:
        kap = tuple(float(x) for x in kap)
        if len(kap) != k + 1:
            raise ValueError(f"expected {k + 1} masses, got {len(kap)}")

        def one(item, kap=kap):
            idx, X = item
            b = separation_distance(X, kap, **sep_kw)
            return {"index": idx, "lower": b.lower, "upper": b.upper, "kind": b.kind.value}

        rows = pmap(one, seq, threads)
        series[kap] = rows
        verdicts[kap] = tail_verdict([r["lower"] for r in rows], [r["upper"] for r in rows], window, ratio)
    if all(v == "vanishing" for v in verdicts.values()):
        verdict = f"consistent-with-{k}-Levy"
    elif any(v == "persistent" for v in verdicts.values()):
        verdict = f"not-{k}-Levy"
    else:
        verdict = "inconclusive"
    return {"k": k, "series": series, "perTuple": verdicts, "verdict": verdict, "note": HEURISTIC_NOTE}


def threshold_components(X: FiniteMMSpace, delta: float):
    """Components of the graph {d < delta}; distinct components are >= delta apart."""
    labels = connected_components(X.dist < delta, directed=False)[1] if X.n else np.zeros(0, int)
    masses = np.bincount(labels, weights=X.weight) if X.n else np.zeros(0)
    return labels, masses


def dissipation_check(
    seq: SpaceSequence,
    delta: float,
    kappa_tuples=(),
    kappa_exp: float = 0.5,
    rho: float | None = None,
    window: int = WINDOW,
    mass_ratio: float = 0.25,
    exact_limit: int = 18,
    sep_limit: int = 64,
    threads: int = 1,
) -> dict:
    """Look for delta-dissipation evidence (cluster families whose largest mass
    vanishes) and for an expansion obstruction (Exp >= c > 1 at rho < delta)."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    rho = delta / 2 if rho is None else rho
    if not 0 < rho < delta:
        raise ValueError("rho must lie in (0, delta)")

    def one(item):
        idx, X = item
        _, masses = threshold_components(X, delta)
        ex = expansion_coefficient(X, kappa_exp, rho, exact_limit=exact_limit)
        row = {
            "index": idx,
            "components": int(masses.size),
            "maxComponentMass": float(masses.max()) if masses.size else 0.0,
            "exp": ex.as_dict(),
            "sep": {},
        }
        if X.n <= sep_limit:
            for kap in kappa_tuples:
                b = separation_distance(X, kap, exact_limit=exact_limit)
                row["sep"][tuple(kap)] = b.as_dict()
        return row

    rows = pmap(one, seq, threads)
    tail = rows[-window:]
    masses = [r["maxComponentMass"] for r in rows]
    tail_m = masses[-window:]
    exp_low = [r["exp"]["lower"] for r in tail]
    c = min(exp_low)
    if _nonincreasing(tail_m) and tail_m[-1] <= mass_ratio * masses[0] and tail_m[-1] < tail_m[0]:
        verdict = "dissipates"
    elif c > 1 + 1e-9:
        verdict = "refuted"
    else:
        verdict = "inconclusive"
    return {
        "delta": delta,
        "rho": rho,
        "kappaExp": kappa_exp,
        "rows": rows,
        "expObstruction": c,
        "verdict": verdict,
        "note": HEURISTIC_NOTE,
    }
