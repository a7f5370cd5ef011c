import json
import math

import numpy as np
import pytest

from conftest import random_space
from mmlab.errors import IoError, ParseError, TriangleViolation
from mmlab.geometry_models import SphereSpec, sample_sphere
from mmlab.io import (
    cloud_to_json,
    dumps,
    graph_to_json,
    io_roundtrip,
    loads_space,
    read_cloud,
    read_graph,
    read_measure,
    read_space,
    space_to_json,
    write_space,
)
from mmlab.mmcore import euclidean_space, two_point_space
from mmlab.spectral import cycle_graph

TWO_POINT = """{
  "labels": ["a", "b"],
  "dist": [
    [0.0, 1.0],
    [1.0, 0.0]
  ],
  "weight": [0.5, 0.5]
}
"""


def test_canonical_two_point(tmp_path):
    p = tmp_path / "two.json"
    p.write_text(TWO_POINT)
    assert io_roundtrip(p)
    assert read_space(p) == two_point_space()
    assert space_to_json(read_space(p)) == TWO_POINT


def test_generated_thousand_points(tmp_path):
    X = euclidean_space(np.random.default_rng(8).random((1000, 3)))
    p = tmp_path / "big.json"
    write_space(X, p)
    first = p.read_text()
    assert io_roundtrip(p)
    Y = read_space(p)
    assert np.array_equal(Y.dist, X.dist) and np.array_equal(Y.weight, X.weight)
    write_space(Y, p)
    assert p.read_text() == first


def test_random_roundtrips(rng):
    for _ in range(20):
        X = random_space(rng, int(rng.integers(1, 9)))
        assert loads_space(space_to_json(X)) == X


def test_tuple_labels():
    X = two_point_space(labels=((0, 1), (1, 0)))
    assert loads_space(space_to_json(X)).labels == X.labels


@pytest.mark.parametrize("token", ["NaN", "Infinity", "-Infinity", "1e999"])
def test_non_finite(token):
    text = TWO_POINT.replace("[1.0, 0.0]", f"[{token}, 0.0]")
    with pytest.raises(ParseError) as e:
        loads_space(text)
    assert e.value.line == 5
    assert e.value.field == "dist"


def test_syntax_error_line():
    with pytest.raises(ParseError) as e:
        loads_space(TWO_POINT.replace('"weight": [0.5, 0.5]', '"weight": [0.5, 0.5,]'))
    assert e.value.line == 7


def test_missing_field():
    with pytest.raises(ParseError) as e:
        loads_space('{"dist": [[0]]}')
    assert e.value.field == "weight"


def test_invalid_metric_propagates():
    text = '{"dist": [[0, 1, 3], [1, 0, 1], [3, 1, 0]], "weight": [0.2, 0.3, 0.5]}'
    with pytest.raises(TriangleViolation):
        loads_space(text)


def test_missing_file(tmp_path):
    with pytest.raises(IoError):
        read_space(tmp_path / "nope.json")
    with pytest.raises(IoError):
        write_space(two_point_space(), tmp_path / "no" / "dir.json")


def test_sample_file(tmp_path):
    c = sample_sphere(SphereSpec(2, 1.5), 30, 4)
    p = tmp_path / "s.json"
    p.write_text(cloud_to_json(c, n=2))
    back = read_cloud(p)
    assert np.array_equal(back.coords, c.coords) and back.radius == 1.5
    X = read_space(p)
    assert np.allclose(X.dist, c.space.dist, atol=1e-12)
    assert json.loads(p.read_text())["n"] == 2


def test_sample_needs_radius(tmp_path):
    p = tmp_path / "s.json"
    p.write_text('{"metric": "geodesic", "coords": [[1, 0]]}')
    with pytest.raises(ParseError):
        read_space(p)
    p.write_text('{"metric": "taxicab", "coords": [[1, 0]]}')
    with pytest.raises(ParseError) as e:
        read_space(p)
    assert e.value.field == "metric"


def test_measure_files(tmp_path):
    p = tmp_path / "m.json"
    p.write_text("[0.25, 0.75]")
    assert read_measure(p).tolist() == [0.25, 0.75]
    p.write_text('{"weight": [1, 0]}')
    assert read_measure(p).tolist() == [1.0, 0.0]
    p.write_text("[0.5, -0.5]")
    with pytest.raises(ParseError):
        read_measure(p)


def test_graph_file(tmp_path):
    g = cycle_graph(6)
    p = tmp_path / "g.json"
    p.write_text(graph_to_json(g))
    h = read_graph(p)
    assert h.space == g.space
    assert h.edges == g.edges
    p.write_text('{"space": ' + TWO_POINT + ', "edges": [[0, 1]]}')
    with pytest.raises(ParseError):
        read_graph(p)


def test_dumps_plain_json():
    out = json.loads(dumps({"a": math.inf, "b": np.float64(0.5), (1, 2): np.arange(2)}))
    assert out == {"a": "inf", "b": 0.5, "1,2": [0, 1]}
