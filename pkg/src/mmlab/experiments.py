"""Built-in numerical experiments and their reports."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc

from . import __version__
from .errors import UnknownExperiment
from .geometry_models import (
    SphereSpec,
    cap_separation_estimate,
    gaussian_interval_inv,
    sample_sphere,
    sphere_projection_sample,
    sphere_sep_model,
)
from .invariants.partial import partial_diameter
from .invariants.separation import separation_distance
from .mmcore import IntervalBound, Kind, LineMeasure, power_space, scale_space, two_point_space
from .sequences import SpaceSequence, dissipation_check, pmap
from .spectral import cycle_graph, lamk_sep_report
from .transport import CDInstance, cd_deficiency, prohorov_to_gaussian

CSV_COLUMNS = ("index", "value", "lower", "upper", "kind", "samples", "seed")


@dataclass
class ExperimentConfig:
    name: str
    seed: int = 42
    samples: int | None = None
    dims: list | None = None
    kappas: list | None = None
    out: str | None = None
    format: str = "json"
    seeds: int | None = None
    threads: int = 1
    options: dict = field(default_factory=dict)


@dataclass
class ExperimentReport:
    name: str
    series: dict  # series name -> list of rows keyed by CSV_COLUMNS
    metadata: dict

    def as_dict(self):
        return {"name": self.name, "series": self.series, "metadata": self.metadata}


def row(index, bound=None, value=None, kind=None, samples=None, seed=None):
    if bound is not None:
        value = bound.value if value is None else value
        lower, upper, kind = bound.lower, bound.upper, bound.kind.value
    else:
        lower = upper = value
        kind = kind or Kind.EXACT.value
    return {"index": index, "value": value, "lower": lower, "upper": upper, "kind": kind, "samples": samples, "seed": seed}


def projected_law(n: int, h: float = 1e-3) -> LineMeasure:
    """First coordinate of the uniform law on S^n(sqrt n), binned on a grid of width h.

    (1 + x / sqrt n) / 2 follows Beta(n/2, n/2), so bin masses come from its CDF.
    """
    s = math.sqrt(n)
    edges = np.arange(-s, s + h, h)
    edges[-1] = s
    cdf = betainc(n / 2, n / 2, np.clip((1 + edges / s) / 2, 0, 1))
    mass = np.diff(cdf)
    mids = 0.5 * (edges[1:] + edges[:-1])
    keep = mass > 0
    return LineMeasure.from_values(mids[keep], mass[keep] / mass[keep].sum())


def _mb_law(cfg):
    dims = cfg.dims or [50, 100, 200, 500]
    m = cfg.samples or 100_000
    emp, model = [], []
    for n in dims:
        x = sphere_projection_sample(n, m, cfg.seed)[:, 0]
        b = prohorov_to_gaussian(LineMeasure.from_values(x, np.full(m, 1.0 / m)))
        emp.append(row(n, IntervalBound(b.lower, b.upper, Kind.ESTIMATE, m, cfg.seed), samples=m, seed=cfg.seed))
        mb = prohorov_to_gaussian(projected_law(n))
        # binning moves mass by at most h/2
        model.append(row(n, IntervalBound(max(0.0, mb.lower - 5e-4), mb.upper + 5e-4, Kind.CERTIFIED)))
    return {"dP_empirical": emp, "dP_model": model}


def _normal_law_sn(cfg):
    dims = cfg.dims or [10, 30, 100, 300, 1000]
    m = cfg.samples or 100_000
    kappa = (cfg.kappas or [0.1])[0]
    target = 2 * gaussian_interval_inv((1 - kappa) / 2)
    out, tgt = [], []
    for n in dims:
        x = sphere_projection_sample(n, m, cfg.seed)[:, 0]
        v = partial_diameter(LineMeasure.from_values(x, np.full(m, 1.0 / m)), 1 - kappa)
        out.append(row(n, value=v, kind=Kind.ESTIMATE.value, samples=m, seed=cfg.seed))
        tgt.append(row(n, value=target))
    return {"partial_diameter": out, "limit": tgt}


def sphere_sep_samples(n, kappa, m, seeds, base_seed, greedy_centers=20, node_budget=200):
    """Certified Sep(sample; kappa/2, kappa/2) intervals and cap estimates over several seeds."""
    bounds, caps = [], []
    for s in range(seeds):
        cloud = sample_sphere(SphereSpec(n), m, base_seed + s)
        b = separation_distance(cloud.space, [kappa / 2, kappa / 2], greedy_centers=greedy_centers, node_budget=node_budget)
        bounds.append(b)
        caps.append(cap_separation_estimate(cloud, kappa / 2, kappa / 2))
    return bounds, caps


def _sphere_obsdiam(cfg):
    dims = cfg.dims or list(range(3, 11))
    kappas = cfg.kappas or [0.1]
    m = cfg.samples or 400
    seeds = cfg.seeds or 20
    series = {}
    for kappa in kappas:
        sep, cap, model = [], [], []
        runs = pmap(lambda n, kappa=kappa: sphere_sep_samples(n, kappa, m, seeds, cfg.seed), dims, cfg.threads)
        for n, (bounds, caps) in zip(dims, runs):
            lo = float(np.mean([b.lower for b in bounds]))
            hi = float(np.mean([b.upper for b in bounds]))
            sep.append(row(n, IntervalBound(lo, hi, Kind.CERTIFIED, m, cfg.seed), samples=m, seed=cfg.seed))
            cap.append(row(n, value=float(np.mean(caps)), kind=Kind.ESTIMATE.value, samples=m, seed=cfg.seed))
            model.append(row(n, value=sphere_sep_model(n, kappa)))
        series[f"sep_sample_k{kappa}"] = sep
        series[f"cap_estimate_k{kappa}"] = cap
        series[f"model_k{kappa}"] = model
    return series


def _lamk_sep(cfg):
    dims = cfg.dims or [16, 32, 64]
    kappas = cfg.kappas or [0.1, 0.2, 0.3]
    series = {}
    for kappa in kappas:
        lhs, rhs = [], []
        for n in dims:
            r = lamk_sep_report(cycle_graph(n), [kappa, kappa])
            lhs.append(row(n, value=r["lhs"]))
            rhs.append(row(n, value=r["rhs"]))
        series[f"lhs_k{kappa}"] = lhs
        series[f"rhs_k{kappa}"] = rhs
    return series


def _cd_sep(cfg):
    ds = cfg.options.get("distances", [1.0, 2.0, 3.0, 4.0])
    K = float(cfg.options.get("K", 1.0))
    defi, bound = [], []
    for d in ds:
        X = two_point_space(d)
        inst = CDInstance(X, K, 0.5, np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.0)
        v, _ = cd_deficiency(inst, exhaustive=True)
        defi.append(row(d, value=v))
        bound.append(row(d, value=math.sqrt(4 / K * math.log(4))))
    return {"deficiency": defi, "sep_bound": bound}


def _dissipate_power(cfg):
    dims = cfg.dims or list(range(1, 11))
    F = two_point_space()
    seq = SpaceSequence([power_space(F, n) for n in dims], list(dims))
    rep = dissipation_check(seq, 1.0, kappa_tuples=[(0.25, 0.25)], sep_limit=64)
    a, b = F.weight
    mass, binom = [], []
    for n, r in zip(dims, rep["rows"]):
        mass.append(row(n, value=r["maxComponentMass"]))
        binom.append(row(n, value=float(max(a**k * b ** (n - k) for k in range(n + 1)))))
    return {"max_component_mass": mass, "binomial_max": binom, "verdict": [row(0, value=rep["verdict"], kind="verdict")]}


def _sphere_dissipate(cfg):
    dims = cfg.dims or [3, 4, 5, 6, 8]
    m = cfg.samples or 100
    kap = [0.3, 0.3]
    big, base, ratio = [], [], []
    for n in dims:
        cloud = sample_sphere(SphereSpec(n, math.sqrt(n)), m, cfg.seed)
        b0 = separation_distance(cloud.space, kap, greedy_centers=20, node_budget=200)
        t = n / math.sqrt(n)
        b1 = separation_distance(scale_space(cloud.space, t), kap, greedy_centers=20, node_budget=200)
        base.append(row(n, b0, samples=m, seed=cfg.seed))
        big.append(row(n, b1, samples=m, seed=cfg.seed))
        ratio.append(row(n, value=t))
    return {"sep_radius_n": big, "sep_radius_sqrt_n": base, "scale": ratio}


EXPERIMENTS = {
    "mb-law": _mb_law,
    "normal-law-sn": _normal_law_sn,
    "sphere-obsdiam": _sphere_obsdiam,
    "lamk-sep": _lamk_sep,
    "cd-sep": _cd_sep,
    "dissipate-power": _dissipate_power,
    "sphere-dissipate": _sphere_dissipate,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    if cfg.name not in EXPERIMENTS:
        raise UnknownExperiment(cfg.name, EXPERIMENTS)
    t0 = time.perf_counter()
    series = EXPERIMENTS[cfg.name](cfg)
    meta = {
        "config": {
            "name": cfg.name,
            "seed": cfg.seed,
            "samples": cfg.samples,
            "dims": cfg.dims,
            "kappas": cfg.kappas,
            "seeds": cfg.seeds,
            "options": cfg.options,
            "threads": cfg.threads,
        },
        "wallTime": time.perf_counter() - t0,
        "version": __version__,
    }
    return ExperimentReport(cfg.name, series, meta)
