"""JSON reading and writing for spaces, graphs and reports."""
from __future__ import annotations

import dataclasses
import json
import math
import re
from pathlib import Path

import numpy as np

from .errors import IoError, ParseError
from .mmcore import FiniteMMSpace, validate_space

_BAD_TOKEN = re.compile(r"(?<![\w\"])(-?Infinity|NaN)(?![\w\"])")
_KEY = re.compile(r'"(labels|dist|weight|edges|space|coords|mu|nu)"\s*:')


def _fmt(v: float) -> str:
    v = float(v)
    if v == 0:
        return "0.0"
    s = format(v, ".17g")
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def _label_json(label):
    if isinstance(label, tuple):
        return [_label_json(x) for x in label]
    if isinstance(label, (np.integer,)):
        return int(label)
    return label


def _label_py(label):
    if isinstance(label, list):
        return tuple(_label_py(x) for x in label)
    return label


def space_to_json(X: FiniteMMSpace) -> str:
    """Byte-stable text: one matrix row per line, 17 significant digits."""
    labels = json.dumps([_label_json(x) for x in X.labels], separators=(", ", ": "))
    rows = ",\n    ".join("[" + ", ".join(_fmt(v) for v in row) + "]" for row in X.dist)
    weight = ", ".join(_fmt(w) for w in X.weight)
    return '{\n  "labels": ' + labels + ',\n  "dist": [\n    ' + rows + '\n  ],\n  "weight": [' + weight + "]\n}\n"


def _locate(text, pos):
    line = text.count("\n", 0, pos) + 1
    keys = list(_KEY.finditer(text, 0, pos))
    return line, keys[-1].group(1) if keys else None


def _loads(text: str):
    def bad_constant(name):
        raise ValueError(name)

    try:
        return json.loads(text, parse_constant=bad_constant)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, e.lineno, _locate(text, e.pos)[1]) from None
    except ValueError:
        m = _BAD_TOKEN.search(text)
        pos = m.start() if m else 0
        line, fld = _locate(text, pos)
        raise ParseError(f"non-finite value {m.group(1) if m else ''}", line, fld) from None


def _finite_array(text, obj, key, ndim):
    if key not in obj:
        raise ParseError(f"missing field {key!r}", None, key)
    try:
        arr = np.array(obj[key], dtype=float)
    except (TypeError, ValueError):
        raise ParseError(f"field {key!r} must be numeric", None, key) from None
    if arr.ndim != ndim:
        raise ParseError(f"field {key!r} must be {ndim}-dimensional", None, key)
    if not np.all(np.isfinite(arr)):
        # literals such as 1e999 parse to inf; report the row they sit on
        bad = np.argwhere(~np.isfinite(arr))[0]
        line = None
        start = text.find(f'"{key}"')
        if start >= 0 and ndim == 2:
            line = text.count("\n", 0, start) + 2 + int(bad[0])
        elif start >= 0:
            line = text.count("\n", 0, start) + 1
        raise ParseError(f"non-finite entry at {tuple(int(b) for b in bad)}", line, key)
    return arr


def space_from_obj(obj, text="") -> FiniteMMSpace:
    if not isinstance(obj, dict):
        raise ParseError("space must be a JSON object", None, None)
    if "coords" in obj and "dist" not in obj:
        return cloud_from_obj(obj, text).space
    dist = _finite_array(text, obj, "dist", 2)
    weight = _finite_array(text, obj, "weight", 1)
    labels = obj.get("labels")
    labels = None if labels is None else [_label_py(x) for x in labels]
    return validate_space(labels, dist, weight)


def loads_space(text: str) -> FiniteMMSpace:
    return space_from_obj(_loads(text), text)


def read_space(path) -> FiniteMMSpace:
    """Space JSON ({labels, dist, weight}) or a sample file ({coords, metric, radius})."""
    return loads_space(_read_text(path))


def write_space(X: FiniteMMSpace, path) -> None:
    _write_text(path, space_to_json(X))


SAMPLE_METRICS = ("geodesic", "euclidean", "linf")


def cloud_to_json(cloud, **meta) -> str:
    """Sample file: ambient coordinates (one point per line) plus how to measure them."""
    head = {"metric": cloud.metric, "radius": cloud.radius, "seed": cloud.seed, **meta}
    lines = ['  "%s": %s' % (k, json.dumps(to_jsonable(v))) for k, v in head.items()]
    rows = ",\n    ".join("[" + ", ".join(_fmt(v) for v in r) + "]" for r in cloud.coords)
    return "{\n" + ",\n".join(lines) + ',\n  "coords": [\n    ' + rows + "\n  ]\n}\n"


def cloud_from_obj(obj, text=""):
    from .geometry_models import PointCloud

    coords = _finite_array(text, obj, "coords", 2)
    metric = obj.get("metric", "euclidean")
    if metric not in SAMPLE_METRICS:
        raise ParseError(f"unknown metric {metric!r}", None, "metric")
    radius = obj.get("radius")
    if metric == "geodesic":
        if not isinstance(radius, (int, float)) or not radius > 0:
            raise ParseError("geodesic samples need a positive radius", None, "radius")
    return PointCloud(coords, metric, radius, obj.get("seed"))


def read_cloud(path):
    text = _read_text(path)
    return cloud_from_obj(_loads(text), text)


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise IoError(path, e.strerror or str(e)) from None


def _write_text(path, text) -> None:
    try:
        Path(path).write_text(text)
    except OSError as e:
        raise IoError(path, e.strerror or str(e)) from None


def read_graph(path):
    from .spectral import EnergyGraph

    text = _read_text(path)
    obj = _loads(text)
    if not isinstance(obj, dict):
        raise ParseError("graph must be a JSON object", None, None)
    if "space" not in obj or "edges" not in obj:
        raise ParseError("graph needs 'space' and 'edges'", None, "space" if "space" not in obj else "edges")
    X = space_from_obj(obj["space"], text)
    edges = []
    for e in obj["edges"]:
        if len(e) != 3 or not all(isinstance(v, (int, float)) for v in e):
            raise ParseError(f"edge {e!r} must be [i, j, conductance]", None, "edges")
        edges.append((int(e[0]), int(e[1]), float(e[2])))
    return EnergyGraph(X, tuple(edges))


def graph_to_json(g) -> str:
    space = space_to_json(g.space).strip().replace("\n", "\n  ")
    edges = ",\n    ".join(f"[{i}, {j}, {_fmt(c)}]" for i, j, c in g.edges)
    return '{\n  "space": ' + space + ',\n  "edges": [\n    ' + edges + "\n  ]\n}\n"


def io_roundtrip(path) -> bool:
    """read, write, read: the space must come back identical and the text must be stable."""
    X = read_space(path)
    text = space_to_json(X)
    Y = loads_space(text)
    return X == Y and space_to_json(Y) == text


def to_jsonable(obj):
    """Convert results (numpy values, tuples as keys, infinities) to plain JSON values."""
    if isinstance(obj, dict):
        return {(k if isinstance(k, str) else ",".join(map(str, k)) if isinstance(k, tuple) else str(k)): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if hasattr(obj, "as_dict"):
        return to_jsonable(obj.as_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj) if f.name != "space"}
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=False, allow_nan=False) + "\n"


def read_measure(path) -> np.ndarray:
    """A measure vector: a bare JSON array, or an object with a "measure" or "weight" array."""
    text = _read_text(path)
    obj = _loads(text)
    if isinstance(obj, list):
        obj = {"measure": obj}
    if not isinstance(obj, dict):
        raise ParseError("measure must be an array or an object", None, None)
    key = next((k for k in ("measure", "weight", "mu", "nu") if k in obj), "measure")
    arr = _finite_array(text, obj, key, 1)
    if np.any(arr < 0):
        raise ParseError("measure entries must be nonnegative", None, key)
    return arr


def write_text(path, text) -> None:
    _write_text(path, text)
