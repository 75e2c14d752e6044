import numpy as np
import pytest
from scipy import stats

from excl.errors import ConfigurationError, DomainError
from excl.pattern import Pattern, to_csv
from excl.simulate import (Constant, Pareto, RngStream, UserTable, as_generator, palm_augment,
                           sample_marks, sample_poisson)
from excl.window import HARD, SimWindow, torus_displacement


class TestRng:
    def test_same_stream_reproduces(self):
        a = RngStream(42, 3).generator.random(5)
        b = RngStream(42, 3).generator.random(5)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ(self):
        assert not np.array_equal(RngStream(42, 0).generator.random(5),
                                  RngStream(42, 1).generator.random(5))

    def test_stateful(self):
        rng = RngStream(1)
        assert as_generator(rng).random() != as_generator(rng).random()

    def test_bad_type(self):
        with pytest.raises(TypeError):
            as_generator("seed")


class TestPoisson:
    def test_zero_intensity(self):
        assert len(sample_poisson(SimWindow.cube(10, 2), 0.0, RngStream(0))) == 0

    def test_overflow(self):
        with pytest.raises(ConfigurationError):
            sample_poisson(SimWindow.cube(1e6, 2), 1e3, RngStream(0))

    def test_determinism_bytes(self):
        w = SimWindow.cube(10, 2)
        a = sample_marks(sample_poisson(w, 1.0, RngStream(9, 2)), Pareto(2.0), RngStream(9, 3))
        b = sample_marks(sample_poisson(w, 1.0, RngStream(9, 2)), Pareto(2.0), RngStream(9, 3))
        assert to_csv(a) == to_csv(b)

    def test_count_moments(self):
        w = SimWindow.cube(10, 2)
        rng = RngStream(5)
        counts = np.array([len(sample_poisson(w, 1.0, rng)) for _ in range(10 ** 4)])
        se_mean = np.sqrt(100 / len(counts))
        assert abs(counts.mean() - 100) <= 3 * se_mean
        # variance of the sample variance of Poisson(100) is about 2 * 100^2 / n
        assert abs(counts.var(ddof=1) - 100) <= 3 * np.sqrt(2 * 100 ** 2 / len(counts))
        # chi-square against Poisson(100) on pooled bins
        edges = np.arange(70, 131, 5)
        obs = np.histogram(counts, np.concatenate([[-1], edges, [10 ** 6]]))[0]
        cdf = stats.poisson.cdf(np.concatenate([[-1], edges - 1, [10 ** 6]]), 100)
        exp = np.diff(cdf) * len(counts)
        chi2 = np.sum((obs - exp) ** 2 / exp)
        assert stats.chi2.sf(chi2, len(obs) - 1) > 0.01

    def test_positions_uniform_and_inside(self):
        w = SimWindow((4.0, 2.0), HARD, (1.0, -1.0))
        p = sample_poisson(w, 50.0, RngStream(3))
        assert np.all(w.contains(p.positions))
        assert stats.kstest((p.positions[:, 0] - 1) / 4, "uniform").pvalue > 0.01

    def test_marks_independent_of_positions(self):
        w = SimWindow.cube(30, 2)
        p = sample_marks(sample_poisson(w, 1.0, RngStream(4)), Pareto(2.0), RngStream(5))
        s = np.log(p.scores)
        for j in range(2):
            r = np.corrcoef(s, p.positions[:, j])[0, 1]
            assert abs(r) <= 3 / np.sqrt(len(p))


class TestMarkLaws:
    def test_constant(self):
        p = sample_marks(Pattern(np.arange(5.0)[:, None], np.ones(5)), Constant(1.0), RngStream(0))
        assert np.all(p.scores == 1.0)

    def test_pareto_tail(self):
        z = Pareto(2.0).sample(10 ** 5, RngStream(1))
        p = np.mean(z > 2)
        assert abs(p - 0.25) <= 3 * np.sqrt(0.25 * 0.75 / 1e5)
        assert z.min() >= 1.0

    def test_pareto_median(self):
        z = Pareto(1.0).sample(10 ** 5, RngStream(2))
        assert np.median(z) == pytest.approx(2.0, rel=0.03)
        assert Pareto(1.0).quantile(0.5) == pytest.approx(2.0)

    def test_pareto_survival(self):
        law = Pareto(2.0, 3.0)
        assert law.survival(6.0) == pytest.approx(0.25)
        assert law.survival(1.0) == 1.0

    def test_pareto_invalid(self):
        with pytest.raises(ConfigurationError):
            Pareto(0.0)

    def test_user_table(self):
        law = UserTable((0.0, 0.5, 1.0), (1.0, 2.0, 4.0))
        z = law.sample(10 ** 4, RngStream(3))
        assert np.median(z) == pytest.approx(2.0, rel=0.05)
        assert law.survival(2.0) == pytest.approx(0.5)

    def test_user_table_invalid(self):
        with pytest.raises(ConfigurationError):
            UserTable((0.0, 1.0), (2.0, 1.0))


class TestPalm:
    def test_empty_plus_origin(self):
        p = palm_augment(Pattern.empty(2), 1.0)
        assert len(p) == 1 and p.score_at([0.0, 0.0]) == 1.0

    def test_count_and_positions(self):
        base = sample_poisson(SimWindow.cube(5, 2, centered=True), 1.0, RngStream(0))
        p = palm_augment(base, Pareto(2.0), RngStream(1))
        assert len(p) == len(base) + 1
        np.testing.assert_array_equal(p.positions[1:], base.positions)

    def test_origin_occupied(self):
        with pytest.raises(DomainError):
            palm_augment(Pattern([[0.0]], [1.0]), 1.0)


class TestTorusDisplacement:
    w = SimWindow.cube(10.0, 1)

    def test_wrap(self):
        assert torus_displacement([9.5], [0.5], self.w)[0] == pytest.approx(1.0)

    def test_zero(self):
        assert torus_displacement([3.0], [3.0], self.w)[0] == 0.0

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        w = SimWindow.cube(7.0, 3)
        a, b = rng.random((100, 3)) * 7, rng.random((100, 3)) * 7
        da = np.linalg.norm(torus_displacement(a, b, w), axis=1)
        db = np.linalg.norm(torus_displacement(b, a, w), axis=1)
        np.testing.assert_array_equal(da, db)
        assert np.all(da <= np.sqrt(3) * 3.5 + 1e-12)

    def test_hard_is_plain(self):
        w = SimWindow.cube(10.0, 1, HARD)
        assert torus_displacement([9.5], [0.5], w)[0] == pytest.approx(-9.0)

    def test_invalid_window(self):
        with pytest.raises(ConfigurationError):
            SimWindow((0.0, 1.0))
