import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from excl.errors import ConfigurationError, DomainError
from excl.grid import GridIndex, knn_distance
from excl.pattern import Pattern
from excl.scoring import (KNN, BallNeighborhood, Const1, Dirac, Exponential, KNNReciprocal,
                          MovingMax, UserGrid, apply_scores, neighborhoods, palm_score_at_origin,
                          rule_from_dict, rule_to_dict, sample_palm_knn_scores)
from excl.simulate import Pareto, RngStream, sample_marks, sample_poisson
from excl.window import HARD, TORUS, SimWindow, torus_displacement


def brute_knn(pos, queries, k, w, exclude=None):
    d = np.linalg.norm(torus_displacement(queries[:, None, :], pos[None, :, :], w), axis=2)
    if exclude is not None:
        d[np.arange(len(queries)), exclude] = np.inf
    order = np.lexsort((np.broadcast_to(np.arange(len(pos)), d.shape), d), axis=1)
    return np.take_along_axis(d, order, 1)[:, :k], order[:, :k]


class TestGridIndex:
    @pytest.mark.parametrize("boundary", [TORUS, HARD])
    @pytest.mark.parametrize("k", [1, 3, 7])
    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_knn_matches_brute_force(self, boundary, k, dim):
        rng = np.random.default_rng(k * 10 + dim)
        w = SimWindow.cube(5.0, dim, boundary)
        pos = rng.random((100, dim)) * 5
        index = GridIndex(pos, w)
        dist, idx = index.knn(pos, k, exclude=np.arange(100))
        bd, bi = brute_knn(pos, pos, k, w, exclude=np.arange(100))
        np.testing.assert_allclose(dist, bd, rtol=0, atol=1e-12)
        np.testing.assert_array_equal(idx, bi)

    @pytest.mark.parametrize("boundary", [TORUS, HARD])
    def test_ball_matches_brute_force(self, boundary):
        rng = np.random.default_rng(1)
        w = SimWindow.cube(6.0, 2, boundary)
        pos = rng.random((200, 2)) * 6
        q = rng.random((30, 2)) * 6
        found = GridIndex(pos, w).ball(q, 1.3)
        d = np.linalg.norm(torus_displacement(q[:, None], pos[None], w), axis=2)
        for i in range(30):
            np.testing.assert_array_equal(found[i], np.flatnonzero(d[i] <= 1.3))

    def test_radius_zero(self):
        pos = np.array([[0.0, 0.0], [1.0, 1.0]])
        found = GridIndex(pos, SimWindow.cube(2, 2)).ball(np.array([[1.0, 1.0], [0.5, 0.5]]), 0.0)
        assert list(found[0]) == [1] and len(found[1]) == 0

    def test_corner_wraps(self):
        w = SimWindow.cube(10.0, 2)
        pos = np.array([[0.1, 0.1], [9.9, 9.9], [5.0, 5.0]])
        dist, idx = GridIndex(pos, w).knn(pos[:1], 1, exclude=np.array([0]))
        assert idx[0, 0] == 1 and dist[0, 0] == pytest.approx(np.sqrt(0.08))

    def test_too_few_neighbours(self):
        with pytest.raises(DomainError):
            GridIndex(np.zeros((1, 2)), SimWindow.cube(1, 2)).knn(np.zeros((1, 2)), 1,
                                                                  exclude=np.array([0]))


class TestKnnDistance:
    def test_one_dim(self):
        assert knn_distance(0.0, [0.5], 1) == 0.5

    def test_second_order(self):
        assert knn_distance([0.0, 0.0], [[0.3, 0.0], [0.0, 0.4]], 2) == pytest.approx(0.4)

    def test_brute_force(self):
        rng = np.random.default_rng(3)
        pts = rng.random((200, 2))
        t = pts[0]
        d = np.sort(np.linalg.norm(pts[1:] - t, axis=1))
        for k in (1, 5, 17):
            assert knn_distance(t, pts, k) == d[k - 1]

    def test_underflow(self):
        with pytest.raises(DomainError):
            knn_distance([0.0], [[1.0]], 2)


class TestApplyScores:
    def test_knn_pair(self):
        p = apply_scores(Pattern([[0.0], [0.5]], [1.0, 1.0]), KNNReciprocal(1))
        np.testing.assert_allclose(p.scores, [2.0, 2.0])

    def test_dirac_keeps_marks(self):
        p = sample_marks(sample_poisson(SimWindow.cube(8, 2), 1.0, RngStream(0)), Pareto(2.0),
                         RngStream(1))
        q = apply_scores(p, MovingMax(KNN(2), Dirac()))
        np.testing.assert_array_equal(q.scores, p.scores)

    def test_const1_ball(self):
        p = Pattern([[0.0], [0.5]], [1.0, 5.0])
        q = apply_scores(p, MovingMax(BallNeighborhood(1.0), Const1()))
        np.testing.assert_array_equal(q.scores, [5.0, 5.0])

    def test_insufficient_points(self):
        with pytest.raises(DomainError):
            apply_scores(Pattern([[0.0]], [1.0]), KNNReciprocal(1))

    def test_user_grid_vanishes_beyond_support(self):
        w = UserGrid((0.0, 0.5), (1.0, 0.0))
        assert w(np.array([[0.7]]))[0] == 0.0
        assert w(np.array([[0.0]]))[0] == 1.0

    def test_knn_exceedance_characterisation(self):
        w = SimWindow.cube(10.0, 2)
        p = sample_poisson(w, 1.0, RngStream(7))
        k = 3
        s = apply_scores(p, KNNReciprocal(k)).scores
        d = np.linalg.norm(torus_displacement(p.positions[:, None], p.positions[None], w), axis=2)
        for y in (0.5, 1.0, 2.0):
            inside = (d < 1 / y).sum(axis=1) - 1
            np.testing.assert_array_equal(s > y, inside >= k)

    @pytest.mark.parametrize("weight", [Const1(), Exponential(1.5), Dirac(),
                                        UserGrid((0.0, 1.0, 2.0), (1.0, 1.4, 0.2))])
    def test_moving_max_bounds(self, weight):
        w = SimWindow.cube(8.0, 2)
        p = sample_marks(sample_poisson(w, 1.0, RngStream(2)), Pareto(2.0), RngStream(3))
        q = apply_scores(p, MovingMax(KNN(2), weight))
        nbs = neighborhoods(p, KNN(2))
        assert np.all(q.scores <= weight.sup * p.scores[nbs].max(axis=1) + 1e-12)
        if isinstance(weight, Const1):
            assert np.all(q.scores >= p.scores)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0, 10), st.floats(0, 10), st.sampled_from(["knn", "movmax"]))
    def test_shift_invariance_on_torus(self, zx, zy, kind):
        w = SimWindow.cube(10.0, 2)
        p = sample_marks(sample_poisson(w, 1.0, RngStream(11)), Pareto(2.0), RngStream(12))
        rule = KNNReciprocal(2) if kind == "knn" else MovingMax(KNN(1), Exponential(1.0))
        z = np.array([zx, zy])
        moved = Pattern(w.wrap(p.positions - z), p.scores, domain=w, check=False)
        a = apply_scores(p, rule).scores
        b = apply_scores(moved, rule).scores
        np.testing.assert_allclose(a, b, rtol=1e-9)

    @pytest.mark.parametrize("nb", [KNN(2), BallNeighborhood(0.8)])
    def test_neighbourhood_subset(self, nb):
        p = sample_poisson(SimWindow.cube(6, 2), 1.0, RngStream(1))
        full = neighborhoods(p, nb)
        part = neighborhoods(p, nb, which=[3, 0])
        for row, i in zip(part, (3, 0)):
            np.testing.assert_array_equal(row, full[i])

    def test_neighbourhood_contains_self(self):
        p = sample_poisson(SimWindow.cube(6, 2), 1.0, RngStream(0))
        nbs = neighborhoods(p, BallNeighborhood(0.7))
        assert all(nb[0] == i for i, nb in enumerate(nbs))


class TestRules:
    def test_roundtrip(self):
        for spec in ({"type": "knn", "k": 2},
                     {"type": "movmax", "neighborhood": {"type": "knn", "k": 1},
                      "weight": {"type": "const1"}},
                     {"type": "movmax", "neighborhood": {"type": "ball", "radius": 0.5},
                      "weight": {"type": "exponential", "rate": 2.0}}):
            assert rule_to_dict(rule_from_dict(spec)) == spec

    @pytest.mark.parametrize("spec", [{"type": "nope"}, {"type": "knn"},
                                      {"type": "knn", "k": 0}])
    def test_invalid(self, spec):
        with pytest.raises(ConfigurationError):
            rule_from_dict(spec)

    def test_weight_normalisation(self):
        with pytest.raises(ConfigurationError):
            UserGrid((0.0, 1.0), (0.5, 0.2))


class TestPalmScore:
    def test_knn_unit(self):
        assert palm_score_at_origin(Pattern([[0.0, 0.0], [1.0, 0.0]], [1, 1]),
                                    KNNReciprocal(1)) == 1.0

    def test_dirac_returns_mark(self):
        p = Pattern([[0.0, 0.0], [1.0, 0.0]], [3.5, 1.0])
        assert palm_score_at_origin(p, MovingMax(KNN(1), Dirac())) == 3.5

    def test_origin_missing(self):
        with pytest.raises(DomainError):
            palm_score_at_origin(Pattern([[1.0, 0.0], [2.0, 0.0]], [1, 1]), KNNReciprocal(1))

    def test_marginal_tail_u5(self):
        xi = sample_palm_knn_scores(1, 2, 4 * 10 ** 5, RngStream(21))
        u = 5.0
        ratio = np.mean(xi > u) * u ** 2 / np.pi
        exact = (1 - np.exp(-np.pi / u ** 2)) * u ** 2 / np.pi
        se = np.sqrt(np.mean(xi > u) / len(xi)) * u ** 2 / np.pi
        assert abs(ratio - exact) <= 3 * se

    def test_palm_sampler_matches_exact_law(self):
        # P(rho_2 > r) = exp(-pi r^2)(1 + pi r^2) in d = 2
        xi = sample_palm_knn_scores(2, 2, 20000, RngStream(22))
        r = 1 / xi
        from scipy import stats
        res = stats.kstest(r, lambda x: 1 - np.exp(-np.pi * x ** 2) * (1 + np.pi * x ** 2))
        assert res.pvalue > 0.01
