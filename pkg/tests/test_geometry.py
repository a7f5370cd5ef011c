import math

import numpy as np
import pytest
from scipy.integrate import simpson

from mmlab.errors import MissingAmbientCoordinates, OutOfRange
from mmlab.geometry_models import (
    SphereSpec,
    gaussian_interval,
    gaussian_interval_inv,
    gaussian_tail_check,
    mb_density,
    project_pushforward,
    sample_gaussian,
    sample_sphere,
    sphere_ball_volume,
    sphere_projection_sample,
    v_inv,
)
from mmlab.io import cloud_to_json
from mmlab.mmcore import LineMeasure
from mmlab.transport import prohorov_to_gaussian


def v_simpson(n, r, pts=20001):
    t = np.linspace(0, math.pi, pts)
    f = np.sin(t) ** (n - 1)
    tr = np.linspace(0, r, pts)
    return simpson(np.sin(tr) ** (n - 1), x=tr) / simpson(f, x=t)


def normal_cdf_quadrature(x, pts=40001):
    t = np.linspace(0, x, pts)
    return simpson(np.exp(-0.5 * t * t), x=t) / math.sqrt(2 * math.pi)


def bisect(f, lo, hi, target, it=80):
    for _ in range(it):
        mid = 0.5 * (lo + hi)
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestSampling:
    def test_one_point(self):
        assert sample_sphere(SphereSpec(3), 1, 0).space.n == 1
        assert sample_gaussian(2, 1, 0).space.n == 1

    def test_circle_diameter(self):
        r = 2.0
        c = sample_sphere(SphereSpec(1, r), 10_000, 5)
        th = np.sort(np.arctan2(c.coords[:, 1], c.coords[:, 0]))
        # farthest partner of each point sits near its antipode
        anti = np.mod(th + 2 * math.pi, 2 * math.pi) - math.pi
        j = np.searchsorted(th, anti)
        gap = np.minimum(np.abs(th[j % th.size] - anti), np.abs(th[(j - 1) % th.size] - anti))
        gap = np.minimum(gap, 2 * math.pi - gap)
        diam = r * (math.pi - gap.min())
        assert abs(diam - math.pi * r) <= 0.05 * r

    def test_geodesic_bounded_by_pi(self):
        X = sample_sphere(SphereSpec(9), 2000, 1).space
        assert X.diameter <= math.pi + 1e-9

    def test_points_on_sphere(self):
        c = sample_sphere(SphereSpec(4, 3.0), 500, 2)
        assert np.allclose(np.linalg.norm(c.coords, axis=1), 3.0)

    def test_chordal(self):
        c = sample_sphere(SphereSpec(2, 1.0, "chordal"), 200, 2)
        assert c.space.diameter <= 2.0 + 1e-12
        g = sample_sphere(SphereSpec(2, 1.0), 200, 2).space
        assert np.allclose(c.space.dist, 2 * np.sin(g.dist / 2), atol=1e-9)

    def test_determinism(self):
        a = cloud_to_json(sample_sphere(SphereSpec(3), 5000, 11))
        b = cloud_to_json(sample_sphere(SphereSpec(3), 5000, 11))
        assert a == b
        assert a != cloud_to_json(sample_sphere(SphereSpec(3), 5000, 12))

    def test_prefix_stable(self):
        # chunked streams: a longer sample extends a shorter one
        a = sample_gaussian(3, 5000, 7).coords
        b = sample_gaussian(3, 9000, 7).coords
        assert np.array_equal(a[:4096], b[:4096])

    def test_gaussian_line(self):
        x = sample_gaussian(1, 100_000, 3).coords[:, 0]
        b = prohorov_to_gaussian(LineMeasure.from_values(x, np.full(x.size, 1e-5)))
        assert b.upper <= 0.02

    def test_gaussian_norms(self):
        c = sample_gaussian(50, 10_000, 4).coords
        assert abs(np.mean(np.sum(c * c, axis=1)) / 50 - 1) <= 0.05

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            SphereSpec(0)
        with pytest.raises(ValueError):
            SphereSpec(2, -1.0)


class TestProjection:
    def test_all_coordinates(self):
        c = sample_sphere(SphereSpec(5, 2.5), 300, 1)
        p = project_pushforward(c, 6)
        assert np.allclose(np.linalg.norm(p.coords, axis=1), 2.5)
        assert p.metric == "linf"

    def test_line_law(self):
        c = sample_sphere(SphereSpec(3), 50, 1)
        nu = project_pushforward(c, 1)
        assert isinstance(nu, LineMeasure)
        assert nu.total == pytest.approx(1.0)

    def test_needs_coordinates(self):
        with pytest.raises(MissingAmbientCoordinates):
            project_pushforward(sample_sphere(SphereSpec(2), 10, 0).space, 1)

    def test_two_marginals_uncorrelated(self):
        x = sphere_projection_sample(500, 100_000, 42, k=2)
        cov = np.cov(x.T)
        assert abs(cov[0, 1]) <= 0.05

    def test_matches_full_sample(self):
        full = sample_sphere(SphereSpec(7, math.sqrt(7)), 5000, 9).coords[:, :2]
        assert np.allclose(sphere_projection_sample(7, 5000, 9, k=2), full)

    def test_mb_law(self):
        x = sphere_projection_sample(500, 100_000, 42)[:, 0]
        b = prohorov_to_gaussian(LineMeasure.from_values(x, np.full(x.size, 1e-5)))
        assert b.upper <= 0.05

    def test_mb_density_histogram(self):
        x = sphere_projection_sample(500, 100_000, 42)[:, 0]
        edges = np.linspace(-3, 3, 61)
        h, _ = np.histogram(x, bins=edges)
        emp = h / (x.size * np.diff(edges))
        mids = 0.5 * (edges[1:] + edges[:-1])
        assert np.max(np.abs(emp - mb_density(mids, 500))) <= 0.05

    def test_mb_density_normalised(self):
        for n, k in ((5, 1), (40, 1), (6, 2)):
            s = math.sqrt(n)
            if k == 1:
                t = np.linspace(-s, s, 200_001)
                assert simpson(mb_density(t, n), x=t) == pytest.approx(1.0, abs=1e-4)
            else:
                g = np.linspace(-s, s, 801)
                X, Y = np.meshgrid(g, g)
                vals = mb_density(np.stack([X, Y], -1).reshape(-1, 2), n, 2).reshape(X.shape)
                assert vals.sum() * (g[1] - g[0]) ** 2 == pytest.approx(1.0, abs=2e-3)


class TestSpecialFunctions:
    def test_v_endpoints(self):
        for n in (1, 2, 5, 40):
            assert sphere_ball_volume(n, 0.0) == 0.0
            assert sphere_ball_volume(n, math.pi) == pytest.approx(1.0, abs=1e-15)
            assert sphere_ball_volume(n, math.pi / 2) == pytest.approx(0.5, abs=1e-15)

    def test_v_closed_form_n2(self):
        for r in np.linspace(0, math.pi, 17):
            assert sphere_ball_volume(2, r) == pytest.approx((1 - math.cos(r)) / 2, abs=1e-10)
            assert v_simpson(2, r) == pytest.approx((1 - math.cos(r)) / 2, abs=1e-10)

    def test_v_against_simpson(self):
        for n in (3, 7, 20):
            for r in (0.3, 1.0, 2.0, 3.0):
                assert sphere_ball_volume(n, r) == pytest.approx(v_simpson(n, r), abs=1e-10)

    def test_v_inverse(self):
        for n in (1, 2, 3, 10, 100, 500):
            for r in np.linspace(0.05, math.pi - 0.05, 25):
                s = sphere_ball_volume(n, r)
                if 1e-300 < s < 1 - 1e-15:
                    # rounding s costs about eps / v'(r) in radius near the poles
                    dens = abs(sphere_ball_volume(n, r + 1e-6) - sphere_ball_volume(n, r - 1e-6)) / 2e-6
                    if dens == 0:
                        continue  # v is flat to machine precision, s carries no information on r
                    assert abs(v_inv(n, s) - r) <= 1e-8 + 4 * np.finfo(float).eps / dens

    def test_v_ranges(self):
        with pytest.raises(OutOfRange):
            sphere_ball_volume(2, 4.0)
        with pytest.raises(OutOfRange):
            v_inv(2, 1.5)

    def test_interval(self):
        assert gaussian_interval(0.0) == 0.0
        assert gaussian_interval(40.0) == pytest.approx(0.5, abs=1e-12)
        assert gaussian_interval(1e6) == pytest.approx(0.5, abs=1e-12)

    def test_interval_inverse_quantile(self):
        oracle = bisect(normal_cdf_quadrature, 0.0, 5.0, 0.45)
        assert oracle == pytest.approx(1.6449, abs=1e-3)
        assert gaussian_interval_inv(0.45) == pytest.approx(oracle, abs=1e-8)
        for s in (1e-6, 0.1, 0.3, 0.499):
            assert gaussian_interval(gaussian_interval_inv(s)) == pytest.approx(s, abs=1e-12)
        with pytest.raises(OutOfRange):
            gaussian_interval_inv(0.5)

    def test_tail(self):
        r0 = gaussian_tail_check(0.0)
        assert r0["tail"] == pytest.approx(0.5) and r0["bound"] == pytest.approx(0.5) and r0["holds"]
        r1 = gaussian_tail_check(1.0)
        assert r1["tail"] == pytest.approx(0.1587, abs=1e-4)
        assert r1["bound"] == pytest.approx(0.3033, abs=1e-4) and r1["holds"]
        r5 = gaussian_tail_check(5.0)
        assert r5["tail"] <= r5["bound"] < 1e-5
        # quadrature cross-check of the tail value
        assert r1["tail"] == pytest.approx(0.5 - normal_cdf_quadrature(1.0), abs=1e-10)
