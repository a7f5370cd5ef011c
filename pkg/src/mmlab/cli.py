"""mmlab command line.

Exit status: 0 on success, 1 when a library error (:class:`MMLabError`) is
raised, 2 for malformed arguments.
"""
from __future__ import annotations

import argparse
import ast
import csv
import io as _stdio
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import io as mio
from .errors import DisconnectedWarning, IoError, MMLabError
from .experiments import CSV_COLUMNS, EXPERIMENTS, ExperimentConfig, run_experiment

# safe arithmetic in n for --param

_FUNCS = {"sqrt": math.sqrt, "log": math.log, "exp": math.exp, "floor": math.floor, "ceil": math.ceil}
_CONSTS = {"pi": math.pi, "e": math.e}
_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a**b,
}


def compile_expr(text: str):
    """Parse an arithmetic expression in n into a callable; anything else is rejected."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError:
        raise ValueError(f"cannot parse expression {text!r}") from None

    def ev(node, n):
        if isinstance(node, ast.Expression):
            return ev(node.body, n)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return node.value
        if isinstance(node, ast.Name):
            if node.id == "n":
                return n
            if node.id in _CONSTS:
                return _CONSTS[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left, n), ev(node.right, n))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand, n)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords:
            return _FUNCS[node.func.id](ev(node.args[0], n))
        raise ValueError(f"unsupported element in expression {text!r}")

    ev(tree, 2)  # reject bad names early
    return lambda n: float(ev(tree, n))


def parse_range(text: str) -> list:
    """'3..12' (inclusive), '3..12:3' (with step) or '3,5,8'."""
    try:
        if ".." in text:
            body, _, step = text.partition(":")
            a, b = body.split("..")
            return list(range(int(a), int(b) + 1, int(step) if step else 1))
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise ValueError(f"bad range {text!r}") from None


def parse_floats(text):
    if text is None:
        return None
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"expected comma-separated numbers, got {text!r}") from None


def parse_tuples(text):
    """'0.3,0.3;0.2,0.2,0.2' -> [(0.3, 0.3), (0.2, 0.2, 0.2)]."""
    if not text:
        return []
    return [tuple(parse_floats(part)) for part in text.split(";") if part.strip()]


def parse_params(items):
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"--param expects key=expr, got {item!r}")
        out[key.strip()] = compile_expr(val)
    return out


def resolve_threads(value):
    if value is not None:
        return max(1, int(value))
    env = os.environ.get("MMLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"MMLAB_THREADS must be an integer, got {env!r}") from None
    return 1


def _measure(text, n):
    """A measure given as a file path, a comma list, or 'uniform'."""
    if text == "uniform":
        return np.full(n, 1.0 / n)
    if Path(text).exists() or not any(c.isdigit() for c in text):
        return mio.read_measure(text)
    return np.array(parse_floats(text))


# commands


def cmd_sep(a):
    X = mio.read_space(a.space)
    b, lab = _run_sep(X, parse_floats(a.kappas), a)
    return {**b.as_dict(), "kappas": parse_floats(a.kappas), "witness": lab}


def _run_sep(X, kappas, a):
    from .invariants.separation import separation_distance

    kw = {}
    if a.exact_limit is not None:
        kw["exact_limit"] = a.exact_limit
    if a.node_budget is not None:
        kw["node_budget"] = int(a.node_budget)
    return separation_distance(X, kappas, return_witness=True, strict=a.strict, **kw)


def cmd_obsdiam(a):
    from .invariants.obsdiam import observable_diameter

    X = mio.read_space(a.space)
    kw = {"seed": a.seed} if a.mode.startswith("heur") and a.seed is not None else {}
    r = observable_diameter(X, a.kappa, mode=a.mode, **kw)
    return {**r.bound.as_dict(), "kappa": a.kappa, "mode": a.mode, "witness": r.witness}


def cmd_alexandrov(a):
    from .invariants.alexandrov import alexandrov_check

    X = mio.read_space(a.space)
    return alexandrov_check(X, a.curv, strict=a.strict).as_dict()


def cmd_dominates(a):
    from .order import lipschitz_dominates

    X, Y = mio.read_space(a.a), mio.read_space(a.b)
    kw = {"budget": float(a.budget)} if a.budget is not None else {}
    return lipschitz_dominates(X, Y, **kw)


def cmd_isomorphic(a):
    from .order import mm_isomorphic

    return mm_isomorphic(mio.read_space(a.a), mio.read_space(a.b))


def cmd_dgp(a):
    from .order import gromov_prohorov_bounds

    X, Y = mio.read_space(a.a), mio.read_space(a.b)
    return gromov_prohorov_bounds(X, Y, budget=float(a.budget), seed=a.seed or 0)


def cmd_dconc(a):
    from .order import dconc_bounds

    X, Y = mio.read_space(a.a), mio.read_space(a.b)
    return dconc_bounds(X, Y, N=a.N, samples=a.samples, seed=a.seed or 0)


def cmd_spectrum(a):
    from .spectral import eigenvalues

    g = mio.read_graph(a.graph)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DisconnectedWarning)
        vals = eigenvalues(g, min(a.k, g.space.n - 1))
    notes = [str(w.message) for w in caught if issubclass(w.category, DisconnectedWarning)]
    return {"k": a.k, "eigenvalues": vals, "connected": not notes, "warnings": notes}


def cmd_sample(a):
    from .geometry_models import SphereSpec, sample_gaussian, sample_sphere

    seed = 0 if a.seed is None else a.seed
    if a.model == "sphere":
        if a.n is None:
            raise ValueError("sample sphere needs --n")
        r = math.sqrt(a.n) if a.r in ("sqrtn", "sqrt(n)") else compile_expr(a.r)(a.n)
        cloud = sample_sphere(SphereSpec(a.n, r, a.metric), a.m, seed)
        meta = {"model": "sphere", "n": a.n, "m": a.m}
    else:
        cloud = sample_gaussian(a.k, a.m, seed)
        meta = {"model": "gaussian", "k": a.k, "m": a.m}
    text = mio.space_to_json(cloud.space) if a.as_space else mio.cloud_to_json(cloud, **meta)
    if a.output:
        mio.write_text(a.output, text)
        return {**meta, "seed": seed, "metric": cloud.metric, "radius": cloud.radius, "path": a.output}
    return _Raw(text)


def _sequence_model(a):
    from .geometry_models import SphereSpec, sample_sphere
    from .mmcore import cycle_space, power_space, scale_space, two_point_space

    params = parse_params(a.param)
    seed = 0 if a.seed is None else a.seed

    def get(name, n, default):
        return params[name](n) if name in params else default

    def build(n):
        if a.model == "sphere":
            r = get("r", n, 1.0)
            return sample_sphere(SphereSpec(n, r, a.metric), a.m, seed + n).space
        if a.model == "power":
            F = two_point_space(get("d", n, 1.0), get("w", n, 0.5))
            return power_space(F, n)
        if a.model == "cycle":
            return cycle_space(n, get("L", n, 2 * math.pi))
        if a.model == "scaled":
            return scale_space(two_point_space(1.0), get("t", n, float(n)))
        raise ValueError(f"unknown model {a.model!r}")

    return build


def cmd_sequence(a):
    from .sequences import SpaceSequence, dissipation_check, k_levy_check, levy_profile, pmap

    idx = parse_range(a.range)
    build = _sequence_model(a)
    seq = SpaceSequence(pmap(build, idx, a.threads), idx)
    sep_kw = {}
    if a.node_budget is not None:
        sep_kw["node_budget"] = int(a.node_budget)
    if a.check == "levy":
        return levy_profile(seq, parse_floats(a.kappas or "0.1"), window=a.window, threads=a.threads, **sep_kw)
    if a.check == "klevy":
        tuples = parse_tuples(a.kappas) or [tuple([0.2] * (a.k + 1))]
        return k_levy_check(seq, a.k, tuples, window=a.window, threads=a.threads, **sep_kw)
    if a.delta is None:
        raise ValueError("--check dissipate needs --delta")
    return dissipation_check(
        seq,
        a.delta,
        kappa_tuples=parse_tuples(a.kappas),
        kappa_exp=a.kappa_exp,
        rho=a.rho,
        window=a.window,
        threads=a.threads,
    )


def cmd_experiment(a):
    opts = {}
    for item in a.option or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"--option expects key=value, got {item!r}")
        vals = parse_floats(val)
        opts[key] = vals if "," in val else vals[0]
    cfg = ExperimentConfig(
        name=a.name,
        seed=42 if a.seed is None else a.seed,
        samples=a.samples,
        dims=parse_range(a.dims) if a.dims else None,
        kappas=parse_floats(a.kappas),
        out=a.out,
        format=a.format,
        seeds=a.seeds,
        threads=a.threads,
        options=opts,
    )
    return run_experiment(cfg)


def cmd_roundtrip(a):
    return {"path": a.file, "roundtrip": mio.io_roundtrip(a.file)}


def _transport_inputs(a):
    X = mio.read_space(a.space)
    return X, _measure(a.mu, X.n), _measure(a.nu, X.n)


def cmd_dp(a):
    from .transport import prohorov_distance

    X, mu, nu = _transport_inputs(a)
    return prohorov_distance(X, mu, nu).as_dict()


def cmd_wp(a):
    from .transport import wasserstein_distance

    X, mu, nu = _transport_inputs(a)
    b, coupling = wasserstein_distance(X, mu, nu, p=a.p)
    return {**b.as_dict(), "p": a.p, "coupling": coupling.plan}


def cmd_cd(a):
    from .transport import CDInstance, cd_deficiency

    X = mio.read_space(a.space)
    inst = CDInstance(X, a.K, a.t, _measure(a.nu0, X.n), _measure(a.nu1, X.n), a.epsilon)
    v, witness = cd_deficiency(inst)
    # the deficiency is a minimum over the candidates tried, hence an upper end
    return {"value": v, "lower": None, "upper": v, "kind": "estimate", "witness": witness, "K": a.K, "t": a.t}


# output


class _Raw(str):
    """Text to be emitted verbatim."""


def _series_of(result):
    d = mio.to_jsonable(result)
    series = d.get("series") if isinstance(d, dict) else None
    if not isinstance(series, dict) or not all(isinstance(v, list) for v in series.values()):
        raise ValueError("csv output needs a result made of series (experiment or sequence)")
    return d, series


def _csv_text(rows, defaults):
    buf = _stdio.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k, defaults.get(k)) is None else r.get(k, defaults.get(k))) for k in CSV_COLUMNS})
    return buf.getvalue()


def emit(result, fmt, out):
    if isinstance(result, _Raw):
        if out:
            mio.write_text(out, str(result))
        else:
            sys.stdout.write(str(result))
        return
    if fmt == "json":
        text = mio.dumps(result)
        if out:
            mio.write_text(out, text)
        else:
            sys.stdout.write(text)
        return
    d, series = _series_of(result)
    meta = d.get("metadata", {})
    cfg = meta.get("config", {}) if isinstance(meta, dict) else {}
    defaults = {"seed": cfg.get("seed"), "samples": cfg.get("samples")}
    if out:
        folder = Path(out)
        try:
            folder.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise IoError(out, e.strerror or str(e)) from None
        for name, rows in series.items():
            mio.write_text(folder / f"{_safe(name)}.csv", _csv_text(rows, defaults))
        rest = {k: v for k, v in d.items() if k != "series"}
        mio.write_text(folder / "metadata.json", json.dumps(rest, indent=2) + "\n")
        return
    for name, rows in series.items():
        sys.stdout.write(f"# series: {name}\n")
        sys.stdout.write(_csv_text(rows, defaults))


def _safe(name):
    return "".join(c if c.isalnum() or c in "._-" else "_" for c in str(name))


# parser


def _globals(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="random seed")
    parser.add_argument("--format", choices=("json", "csv"), default=default, help="output format (default json)")
    parser.add_argument("--out", default=default, help="output file (json) or folder (csv)")
    parser.add_argument("--threads", type=int, default=default, help="worker threads (default $MMLAB_THREADS or 1)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmlab", description="Metric measure space computations.")
    p.add_argument("--version", action="version", version=f"mmlab {__version__}")
    _globals(p, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _globals(common, suppress=True)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.set_defaults(fn=fn)
        return s

    s = add("sep", cmd_sep, "separation distance Sep(X; kappas)")
    s.add_argument("space")
    s.add_argument("--kappas", required=True, help="comma-separated masses, e.g. 0.3,0.3")
    s.add_argument("--exact-limit", type=int)
    s.add_argument("--node-budget", type=float)
    s.add_argument("--strict", action="store_true", help="fail instead of bounding oversize instances")

    s = add("obsdiam", cmd_obsdiam, "observable diameter ObsDiam(X; -kappa)")
    s.add_argument("space")
    s.add_argument("--kappa", type=float, required=True)
    s.add_argument("--mode", choices=("exact", "heur", "heuristic", "sandwich"), default="exact")

    s = add("alexandrov", cmd_alexandrov, "four-point curvature test")
    s.add_argument("space")
    s.add_argument("--curv", type=float, default=0.0)
    s.add_argument("--strict", action="store_true", help="fail on perimeter violations")

    for name, fn, help_ in (
        ("dominates", cmd_dominates, "does A Lipschitz-dominate B"),
        ("isomorphic", cmd_isomorphic, "are A and B mm-isomorphic"),
        ("dgp", cmd_dgp, "bounds on the Gromov-Prohorov distance and box distance"),
        ("dconc", cmd_dconc, "bounds on the observable distance"),
    ):
        s = add(name, fn, help_)
        s.add_argument("a")
        s.add_argument("b")
        if name in ("dominates", "dgp"):
            s.add_argument("--budget", type=float, default=None if name == "dominates" else 1e6)
        if name == "dconc":
            s.add_argument("--N", type=int, default=1)
            s.add_argument("--samples", type=int, default=1000)

    s = add("spectrum", cmd_spectrum, "low eigenvalues of a graph energy")
    s.add_argument("graph")
    s.add_argument("--k", type=int, default=5)

    s = add("sample", cmd_sample, "sample a sphere or a Gaussian space")
    s.add_argument("model", choices=("sphere", "gaussian"))
    s.add_argument("--n", type=int, help="sphere dimension")
    s.add_argument("--k", type=int, default=1, help="Gaussian dimension")
    s.add_argument("--r", default="1", help="radius: a number, 'sqrtn' or an expression in n")
    s.add_argument("--m", type=int, required=True, help="number of points")
    s.add_argument("--metric", choices=("geodesic", "chordal"), default="geodesic")
    s.add_argument("-o", "--output", help="write the sample here")
    s.add_argument("--as-space", action="store_true", help="write the dense space JSON instead of coordinates")

    s = add("sequence", cmd_sequence, "finite-window diagnostics for a model sequence")
    s.add_argument("--model", choices=("sphere", "power", "cycle", "scaled"), required=True)
    s.add_argument("--param", action="append", help="key=expression in n, e.g. r=sqrt(n)")
    s.add_argument("--range", required=True, help="indices, e.g. 3..12")
    s.add_argument("--check", choices=("levy", "klevy", "dissipate"), default="levy")
    s.add_argument("--k", type=int, default=1, help="k for --check klevy")
    s.add_argument("--kappas", help="levy: 0.1,0.2; klevy and dissipate: tuples such as 0.3,0.3;0.2,0.2,0.2")
    s.add_argument("--delta", type=float)
    s.add_argument("--rho", type=float)
    s.add_argument("--kappa-exp", type=float, default=0.5)
    s.add_argument("--window", type=int, default=5)
    s.add_argument("--m", type=int, default=100, help="sample size for the sphere model")
    s.add_argument("--metric", choices=("geodesic", "chordal"), default="geodesic")
    s.add_argument("--node-budget", type=float)

    s = add("experiment", cmd_experiment, "run a built-in experiment")
    s.add_argument("name", help="one of " + ", ".join(EXPERIMENTS))
    s.add_argument("--samples", type=int)
    s.add_argument("--dims", help="e.g. 3..10 or 50,100,200")
    s.add_argument("--kappas")
    s.add_argument("--seeds", type=int, help="number of seeds per index")
    s.add_argument("--option", action="append", help="key=value passed to the experiment")

    s = add("roundtrip", cmd_roundtrip, "read, write and re-read a space file")
    s.add_argument("file")

    for name, fn, help_ in (
        ("dp", cmd_dp, "Prohorov distance of two measures on a space"),
        ("wp", cmd_wp, "Wasserstein distance of two measures on a space"),
    ):
        s = add(name, fn, help_)
        s.add_argument("space")
        s.add_argument("--mu", required=True, help="measure file, comma list or 'uniform'")
        s.add_argument("--nu", required=True)
        if name == "wp":
            s.add_argument("--p", type=float, default=1.0)

    s = add("cd", cmd_cd, "CD(K, inf) deficiency for a pair of measures")
    s.add_argument("space")
    s.add_argument("--K", type=float, default=1.0)
    s.add_argument("--t", type=float, default=0.5)
    s.add_argument("--nu0", required=True)
    s.add_argument("--nu1", required=True)
    s.add_argument("--epsilon", type=float, default=0.0)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:  # argparse has already printed the usage message
        return int(e.code or 0)
    a.format = a.format or "json"
    try:
        a.threads = resolve_threads(a.threads)
        result = a.fn(a)
        emit(result, a.format, a.out)
    except MMLabError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
