import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_space
from mmlab.errors import (
    AsymmetricMatrix,
    DegenerateDistance,
    MassNotOne,
    NonFiniteValue,
    NonpositiveCap,
    NonpositiveScale,
    NonzeroDiagonal,
    ProductTooLarge,
    TriangleViolation,
    ZeroWeightPoint,
)
from mmlab.mmcore import (
    IntervalBound,
    Kind,
    LineMeasure,
    coarsen,
    cycle_space,
    discrete_space,
    line_space,
    median_levy_mean,
    point_space,
    power_space,
    product_space,
    pushforward,
    scale_space,
    strip_zero_weights,
    triangle_excess,
    truncate_space,
    two_point_space,
    validate_space,
)
from mmlab.order import mm_isomorphic
from mmlab.transport import prohorov_distance


class TestValidate:
    def test_one_point(self):
        X = validate_space(["p"], [[0.0]], [1.0])
        assert X.n == 1 and X.diameter == 0.0

    def test_two_point(self):
        X = validate_space(["a", "b"], [[0, 1], [1, 0]], [0.5, 0.5])
        assert X.dist[0, 1] == 1.0
        assert X.weight.tolist() == [0.5, 0.5]

    def test_triangle_violation_names_the_triple(self):
        with pytest.raises(TriangleViolation) as e:
            validate_space(["a", "b", "c"], [[0, 1, 3], [1, 0, 1], [3, 1, 0]], [1 / 3] * 3)
        err = e.value
        assert (err.i, err.j, err.k) == ("a", "c", "b")
        assert err.amount == pytest.approx(1.0)

    @pytest.mark.parametrize(
        "dist, weight, exc",
        [
            ([[0, 1], [2, 0]], [0.5, 0.5], AsymmetricMatrix),
            ([[1, 1], [1, 0]], [0.5, 0.5], NonzeroDiagonal),
            ([[0, 0], [0, 0]], [0.5, 0.5], DegenerateDistance),
            ([[0, 1], [1, 0]], [0.5, 0.4], MassNotOne),
            ([[0, 1], [1, 0]], [1.0, 0.0], ZeroWeightPoint),
            ([[0, float("nan")], [float("nan"), 0]], [0.5, 0.5], NonFiniteValue),
        ],
    )
    def test_rejections(self, dist, weight, exc):
        with pytest.raises(exc):
            validate_space(None, dist, weight)

    def test_tolerances(self):
        # asymmetry and mass defects inside 1e-9 are accepted
        validate_space(None, [[0, 1], [1 + 5e-10, 0]], [0.5, 0.5 + 5e-10])

    def test_strip_zero_weights(self):
        X = strip_zero_weights(["a", "b", "c"], [[0, 1, 2], [1, 0, 1], [2, 1, 0]], [0.5, 0.0, 0.5])
        assert X.labels == ("a", "c") and X.dist[0, 1] == 2.0

    def test_triangle_excess_zero_on_metrics(self, rng):
        for _ in range(20):
            X = random_space(rng, 6)
            assert triangle_excess(X.dist)[0].max() <= 1e-12


class TestScaleTruncate:
    def test_identity_scale(self):
        X = cycle_space(5)
        assert scale_space(X, 1.0) == X

    def test_scale_two_point(self):
        assert scale_space(two_point_space(1.0), 3.0).dist[0, 1] == 3.0

    @given(st.floats(0.01, 100))
    @settings(max_examples=50, deadline=None)
    def test_scale_inverse(self, t):
        X = cycle_space(6)
        Y = scale_space(scale_space(X, t), 1 / t)
        assert np.max(np.abs(Y.dist - X.dist)) <= 1e-12 * max(1.0, X.diameter)

    def test_bad_scale(self):
        with pytest.raises(NonpositiveScale):
            scale_space(point_space(), 0.0)

    def test_truncate_large_cap(self):
        X = cycle_space(7)
        assert truncate_space(X, X.diameter) == X

    def test_truncate_two_point(self):
        assert truncate_space(two_point_space(5.0), 1.0).dist[0, 1] == 1.0

    def test_truncate_line(self):
        X = line_space([0, 2, 5])
        Y = truncate_space(X, 3.0)
        assert Y.dist[0, 2] == 3.0 and Y.dist[0, 1] == 2.0 and Y.dist[1, 2] == 3.0
        assert triangle_excess(Y.dist)[0].max() <= 0

    def test_bad_cap(self):
        with pytest.raises(NonpositiveCap):
            truncate_space(point_space(), -1.0)


class TestProducts:
    def test_product_with_point(self, rng):
        X = random_space(rng, 5)
        assert mm_isomorphic(product_space(X, point_space()), X).answer

    def test_square_linf(self):
        F = two_point_space(1.0)
        P = product_space(F, F, p=math.inf)
        assert P.n == 4
        off = P.dist[~np.eye(4, dtype=bool)]
        assert set(off.tolist()) == {1.0}

    def test_square_l1(self):
        F = two_point_space(1.0)
        P = product_space(F, F, p=1)
        off = P.dist[~np.eye(4, dtype=bool)]
        assert set(off.tolist()) == {1.0, 2.0}
        # opposite corners (a,a) and (b,b)
        assert P.dist[0, 3] == 2.0

    def test_product_weights_multiply(self):
        F = two_point_space(1.0, w=0.25)
        P = product_space(F, F)
        assert sorted(P.weight.tolist()) == pytest.approx(sorted([0.75**2, 0.75 * 0.25, 0.25 * 0.75, 0.25**2]))

    def test_power_size_and_limit(self):
        F = two_point_space()
        assert power_space(F, 6).n == 64
        with pytest.raises(ProductTooLarge):
            power_space(F, 40)


class TestLineMeasures:
    def test_constant_pushforward(self, rng):
        X = random_space(rng, 5)
        nu = pushforward(X, np.full(5, 2.0))
        assert nu.atoms == [(2.0, pytest.approx(1.0))]

    def test_identity_pushforward(self):
        nu = pushforward(two_point_space(), [0.0, 1.0])
        assert nu.atoms == [(0.0, 0.5), (1.0, 0.5)]

    def test_distance_to_point(self):
        X = discrete_space(3)
        nu = pushforward(X, X.dist[0])
        assert nu.positions.tolist() == [0.0, 1.0]
        assert nu.masses.tolist() == pytest.approx([1 / 3, 2 / 3])

    @pytest.mark.parametrize(
        "atoms, interval, mean",
        [
            ([(3.0, 1.0)], (3.0, 3.0), 3.0),
            ([(0.0, 0.5), (1.0, 0.5)], (0.0, 1.0), 0.5),
            ([(0.0, 0.6), (1.0, 0.4)], (0.0, 0.0), 0.0),
        ],
    )
    def test_median(self, atoms, interval, mean):
        nu = LineMeasure([a for a, _ in atoms], [m for _, m in atoms])
        got_interval, got_mean = median_levy_mean(nu)
        assert got_interval == interval and got_mean == mean

    def test_median_needs_probability(self):
        with pytest.raises(MassNotOne):
            median_levy_mean(LineMeasure([0.0], [0.5]))

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            LineMeasure([1.0, 0.0], [0.5, 0.5])


class TestCoarsen:
    def test_large_eps(self, rng):
        X = random_space(rng, 6)
        c = coarsen(X, X.diameter * 1.5)
        assert c.space.n == 1 and c.bound.upper <= X.diameter * 1.5

    def test_small_eps(self):
        X = cycle_space(8)
        c = coarsen(X, 0.1)
        assert c.space == X or mm_isomorphic(c.space, X).answer
        assert c.bound.upper == 0.0

    def test_grid(self):
        X = line_space(np.linspace(0, 1, 100))
        c = coarsen(X, 0.25)
        assert c.space.n <= 5
        assert c.bound.upper <= 0.25
        # push-forward measure inside X, compared directly
        proj = np.zeros(X.n)
        for i, j in enumerate(c.projection):
            proj[X.index(c.space.labels[j])] += X.weight[i]
        dp = prohorov_distance(X, X.weight, proj).value
        assert dp <= 0.125 + 1e-12
        assert c.bound.upper == pytest.approx(min(1.0, 2 * dp))


class TestIntervalBound:
    def test_exact_requires_zero_width(self):
        with pytest.raises(ValueError):
            IntervalBound(0.0, 1.0, Kind.EXACT)

    def test_order(self):
        with pytest.raises(ValueError):
            IntervalBound(2.0, 1.0, Kind.CERTIFIED)

    def test_estimate_carries_seed(self):
        b = IntervalBound(0.1, 0.2, Kind.ESTIMATE, samples=10, seed=3)
        assert b.as_dict()["seed"] == 3 and b.as_dict()["samples"] == 10
