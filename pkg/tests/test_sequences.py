import math

import numpy as np
import pytest

from mmlab.geometry_models import SphereSpec, sample_sphere, sphere_sep_model
from mmlab.invariants import separation_distance
from mmlab.mmcore import cycle_space, discrete_space, line_space, point_space, power_space, scale_space, two_point_space
from mmlab.sequences import (
    SpaceSequence,
    dissipation_check,
    k_levy_check,
    levy_profile,
    pmap,
    tail_verdict,
    threshold_components,
)


def two_cluster(n, per=10):
    # two clusters of width 0.01/n whose gap 1 - 1/(2n) tends to 1
    s = 0.01 / n
    a = np.linspace(0, s, per)
    return line_space(np.concatenate([a, a + s + 1 - 1 / (2 * n)]))


def test_empty_sequence():
    with pytest.raises(ValueError):
        SpaceSequence([])


def test_tail_verdict():
    assert tail_verdict([0] * 6, [1, 0.8, 0.5, 0.3, 0.2, 0.1]) == "vanishing"
    assert tail_verdict([0.5, 0.6, 0.6, 0.7, 0.8], [1] * 5) == "persistent"
    assert tail_verdict([0, 0, 0, 0, 0], [1, 2, 1, 2, 1]) == "inconclusive"


def test_pmap_order():
    assert pmap(lambda x: x * x, range(20), threads=4) == [x * x for x in range(20)]


class TestLevy:
    def test_points(self):
        r = levy_profile(SpaceSequence([point_space()] * 6), [0.1, 0.3])
        assert r["verdict"] == "consistent-with-Levy"
        assert all(row["upper"] == 0.0 for row in r["series"][0.1])
        assert "not proven" in r["note"]

    def test_scaled(self):
        X = two_point_space()
        seq = SpaceSequence([scale_space(X, t) for t in (1, 2, 4, 8, 16, 32)], [1, 2, 4, 8, 16, 32])
        r = levy_profile(seq, [0.2])
        assert r["verdict"] == "not-Levy"
        lows = [row["lower"] for row in r["series"][0.2]]
        assert lows == sorted(lows)

    def test_sphere_trend(self):
        dims = list(range(3, 13))
        seq = SpaceSequence([sample_sphere(SphereSpec(n), 60, 1).space for n in dims], dims)
        up = np.array([row["upper"] for row in levy_profile(seq, [0.1])["series"][0.1]])
        model = np.array([sphere_sep_model(n, 0.1) for n in dims])
        assert np.polyfit(dims, up, 1)[0] < 0
        assert np.all(np.diff(model) < 0)
        assert up[-1] < up[0]

    def test_threads_identical(self):
        seq = SpaceSequence([discrete_space(n) for n in range(2, 8)])
        a = levy_profile(seq, [0.1, 0.4], threads=1)
        b = levy_profile(seq, [0.1, 0.4], threads=4)
        assert a == b


class TestKLevy:
    def test_levy_implies_k_levy(self):
        seq = SpaceSequence([point_space()] * 5)
        for k in (1, 2, 3):
            r = k_levy_check(seq, k, [tuple([0.2] * (k + 1))])
            assert r["verdict"] == f"consistent-with-{k}-Levy"

    def test_two_clusters(self):
        seq = SpaceSequence([two_cluster(n) for n in range(1, 9)], list(range(1, 9)))
        assert k_levy_check(seq, 2, [(0.3, 0.3, 0.3)])["verdict"] == "consistent-with-2-Levy"
        r = k_levy_check(seq, 1, [(0.3, 0.3)])
        assert r["verdict"] == "not-1-Levy"
        assert r["series"][(0.3, 0.3)][-1]["lower"] > 0.9

    def test_more_masses_than_points(self):
        seq = SpaceSequence([discrete_space(3, weight=[0.5, 0.3, 0.2]) for _ in range(5)])
        r = k_levy_check(seq, 5, [(0.1,) * 6])
        assert all(row["upper"] == 0.0 for row in r["series"][(0.1,) * 6])

    def test_tuple_length(self):
        with pytest.raises(ValueError):
            k_levy_check(SpaceSequence([point_space()]), 2, [(0.2, 0.2)])

    def test_threads_identical(self):
        seq = SpaceSequence([two_cluster(n) for n in range(1, 7)])
        assert k_levy_check(seq, 1, [(0.3, 0.3)], threads=1) == k_levy_check(seq, 1, [(0.3, 0.3)], threads=3)


class TestDissipation:
    @pytest.mark.parametrize("w", [0.5, 0.3])
    def test_power_spaces(self, w):
        F = two_point_space(1.0, w)
        dims = list(range(1, 11))
        seq = SpaceSequence([power_space(F, n) for n in dims], dims)
        r = dissipation_check(seq, 1.0, kappa_tuples=[(0.2, 0.2)], sep_limit=64)
        assert r["verdict"] == "dissipates"
        a, b = F.weight
        for n, row in zip(dims, r["rows"]):
            assert row["maxComponentMass"] == pytest.approx(max(a**k * b ** (n - k) for k in range(n + 1)), abs=1e-12)
            for s in row["sep"].values():
                assert s["lower"] >= 1.0 - 1e-9

    def test_constant_two_point(self):
        r = dissipation_check(SpaceSequence([two_point_space()] * 6), 0.5)
        assert r["verdict"] == "inconclusive"
        assert all(row["maxComponentMass"] == 0.5 for row in r["rows"])

    @pytest.mark.parametrize("delta", [0.3, 0.5, 1.0])
    def test_cycles_refuted(self, delta):
        ns = [64, 96, 128, 192, 256]
        r = dissipation_check(SpaceSequence([cycle_space(n) for n in ns], ns), delta)
        assert r["verdict"] == "refuted"
        assert r["expObstruction"] > 1

    def test_threshold_components(self):
        X = line_space([0.0, 0.1, 0.2, 1.0, 1.05])
        labels, masses = threshold_components(X, 0.5)
        assert sorted(masses.tolist()) == pytest.approx([0.4, 0.6])
        assert labels[0] == labels[2] != labels[3]

    def test_bad_rho(self):
        with pytest.raises(ValueError):
            dissipation_check(SpaceSequence([point_space()]), 0.5, rho=0.7)

    def test_threads_identical(self):
        ns = [64, 96, 128]
        seq = SpaceSequence([cycle_space(n) for n in ns], ns)
        assert dissipation_check(seq, 0.5, threads=1) == dissipation_check(seq, 0.5, threads=3)

    def test_sphere_scaling(self):
        n = 4
        cloud = sample_sphere(SphereSpec(n, math.sqrt(n)), 60, 3)
        t = n / math.sqrt(n)
        a = separation_distance(cloud.space, [0.3, 0.3])
        b = separation_distance(scale_space(cloud.space, t), [0.3, 0.3])
        assert b.lower == pytest.approx(t * a.lower) and b.upper == pytest.approx(t * a.upper)
