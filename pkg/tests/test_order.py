import itertools

import numpy as np
import pytest

from conftest import random_space
from oracles import gp_metric_grid
from mmlab.mmcore import coarsen, discrete_space, line_space, point_space, scale_space, two_point_space, validate_space
from mmlab.order import (
    bridge_metric,
    check_domination_map,
    cross_prohorov,
    dconc_bounds,
    distance_matrix_distribution,
    gromov_prohorov_bounds,
    is_extension_metric,
    lipschitz_dominates,
    mm_isomorphic,
)


def permuted(X, perm):
    return validate_space([X.labels[i] for i in perm], X.dist[np.ix_(perm, perm)], X.weight[perm])


def brute_dominates(X, Y):
    for f in itertools.product(range(Y.n), repeat=X.n):
        f = np.array(f)
        if np.any(Y.dist[np.ix_(f, f)] > X.dist + 1e-12):
            continue
        if np.allclose(np.bincount(f, weights=X.weight, minlength=Y.n), Y.weight, atol=1e-9):
            return True
    return False


class TestDomination:
    def test_point_is_dominated(self, rng):
        X = random_space(rng, 5)
        r = lipschitz_dominates(X, point_space())
        assert r.answer and check_domination_map(X, point_space(), r.witness)

    def test_scaled_copy(self, rng):
        X = random_space(rng, 5)
        for t in (0.2, 1.0):
            r = lipschitz_dominates(X, scale_space(X, t))
            assert r.answer
            assert check_domination_map(X, scale_space(X, t), r.witness)

    def test_stretch_refused(self):
        r = lipschitz_dominates(two_point_space(1.0), two_point_space(2.0))
        assert r.answer is False
        assert lipschitz_dominates(two_point_space(2.0), two_point_space(1.0)).answer

    def test_against_brute_force(self, rng):
        for _ in range(40):
            X = random_space(rng, int(rng.integers(1, 5)), integer=True)
            Y = random_space(rng, int(rng.integers(1, 4)), integer=True)
            r = lipschitz_dominates(X, Y)
            assert bool(r.answer) == brute_dominates(X, Y)
            if r.answer:
                assert check_domination_map(X, Y, r.witness)


class TestIsomorphism:
    def test_permuted_labels(self, rng):
        for _ in range(30):
            X = random_space(rng, int(rng.integers(1, 8)))
            perm = rng.permutation(X.n)
            r = mm_isomorphic(X, permuted(X, perm))
            assert r.answer
            Y = permuted(X, perm)
            p = np.array(r.permutation)
            assert np.allclose(Y.dist[np.ix_(p, p)], X.dist) and np.allclose(Y.weight[p], X.weight)

    def test_weight_multiset(self):
        r = mm_isomorphic(two_point_space(1.0, 0.5), two_point_space(1.0, 0.3))
        assert not r.answer and r.reason

    def test_same_distances_other_pairing(self):
        D = np.abs(np.subtract.outer(np.arange(4.0), np.arange(4.0)))
        X = validate_space(range(4), D, [0.4, 0.2, 0.2, 0.2])
        Y = validate_space(range(4), D, [0.2, 0.4, 0.2, 0.2])
        assert sorted(X.dist.ravel()) == sorted(Y.dist.ravel())
        assert sorted(X.weight) == sorted(Y.weight)
        assert not mm_isomorphic(X, Y).answer
        # exhaustive 4! check
        assert not any(
            np.allclose(Y.dist[np.ix_(p, p)], X.dist) and np.allclose(Y.weight[list(p)], X.weight)
            for p in itertools.permutations(range(4))
        )


class TestMatrixDistribution:
    def test_order_one(self, rng):
        d = distance_matrix_distribution(random_space(rng, 4), 1)
        assert len(d.atoms) == 1 and d.atoms[0][1] == pytest.approx(1.0)

    def test_two_point(self):
        d = distance_matrix_distribution(two_point_space(), 2)
        offs = sorted((M[0, 1], p) for M, p in d.atoms)
        assert offs == [(0.0, 0.5), (1.0, 0.5)]

    def test_isomorphic_same_law(self, rng):
        for _ in range(10):
            X = random_space(rng, 5)
            Y = permuted(X, rng.permutation(5))
            for N in (2, 3):
                assert distance_matrix_distribution(X, N).same_as(distance_matrix_distribution(Y, N))

    def test_sampled_close_to_exact(self):
        X = discrete_space(3)
        d = distance_matrix_distribution(X, 2, mode="sample", count=20000, seed=1)
        zero = sum(p for M, p in d.atoms if M[0, 1] == 0)
        assert zero == pytest.approx(1 / 3, abs=0.02)


class TestGromovProhorov:
    def test_self(self, rng):
        for _ in range(10):
            X = random_space(rng, 5)
            b = gromov_prohorov_bounds(X, X)
            assert b.dgp.upper == 0.0 and b.box.upper == 0.0

    def test_point_vs_two_point(self):
        for w in (0.1, 0.35):
            b = gromov_prohorov_bounds(point_space(), two_point_space(1.0, w))
            assert b.dgp.contains(w)
            assert b.dgp.value == pytest.approx(w, abs=1e-12)
            oracle = gp_metric_grid((1.0, w))
            assert b.dgp.lower <= oracle + 1e-12
            assert b.dgp.upper <= oracle + 1e-2

    def test_sandwich(self, rng):
        for _ in range(30):
            X = random_space(rng, int(rng.integers(1, 5)))
            Y = random_space(rng, int(rng.integers(1, 5)))
            b = gromov_prohorov_bounds(X, Y)
            assert b.dgp.lower <= b.dgp.upper
            assert b.box.lower <= b.box.upper <= 1.0

    def test_bridge_is_metric(self, rng):
        X, Y = random_space(rng, 4), random_space(rng, 3)
        b = gromov_prohorov_bounds(X, Y)
        cross = bridge_metric(X, Y, b.relation.relation, b.bridge)
        assert is_extension_metric(X, Y, cross)
        assert cross_prohorov(cross, X.weight, Y.weight) == pytest.approx(b.dgp.upper)

    def test_coarsening_hint(self):
        X = line_space(np.linspace(0, 1, 30))
        eps = 0.3
        c = coarsen(X, eps)
        hint = [(i, int(j)) for i, j in enumerate(c.projection)]
        b = gromov_prohorov_bounds(X, c.space, budget=2e4, hints=[hint])
        assert b.dgp.upper <= eps / 2 + 1e-12

    def test_box_of_shared_metric(self, rng):
        # half the box distance of (X, mu) and (X, nu) is at most d_P(mu, nu)
        from mmlab.transport import prohorov_distance

        for _ in range(10):
            X = random_space(rng, 4)
            w = rng.random(4) + 0.1
            Y = X.with_weight(w / w.sum())
            b = gromov_prohorov_bounds(X, Y)
            assert 0.5 * b.box.lower <= prohorov_distance(X, X.weight, Y.weight).value + 1e-12


class TestDconc:
    def test_self(self, rng):
        X = random_space(rng, 4)
        d = dconc_bounds(X, X, samples=100)
        assert d["lower"] == 0.0 and d["upper"] == 0.0

    def test_point_vs_two_point(self):
        d = dconc_bounds(point_space(), two_point_space(), samples=1000, seed=3)
        assert d["lower"] > 0
        assert d["lower"] <= d["upper"]
        assert d["lowerKind"] == "estimate" and d["upperKind"] == "certified"

    def test_lower_below_upper(self, rng):
        for _ in range(10):
            X = random_space(rng, int(rng.integers(1, 4)))
            Y = random_space(rng, int(rng.integers(1, 4)))
            d = dconc_bounds(X, Y, samples=60, seed=int(rng.integers(1000)))
            assert d["lower"] <= d["upper"] + 1e-12
