import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from excl.errors import DataError, DomainError
from excl.pattern import (Ball, Box, Pattern, ScalingMap, anchor_first_exceedance,
                          anchor_first_max, from_csv, from_json, lexicographic_order, max_score,
                          read_csv, restrict, scale, shift, to_csv, to_json, write_csv)
from excl.window import SimWindow


def P(points, dim=None):
    return Pattern.from_points(points, dim=dim)


coords = st.floats(-50, 50, allow_nan=False, allow_infinity=False, width=64)


# multiples of 1/64 keep shifts by multiples of 1/8 exact
dyadic = st.integers(-3200, 3200).map(lambda i: i / 64)


@st.composite
def patterns(draw, dim=2, max_size=8, elements=coords):
    n = draw(st.integers(0, max_size))
    pos = draw(hnp.arrays(float, (n, dim), elements=elements, unique=False))
    # keep positions pairwise distinct
    _, first = np.unique(pos, axis=0, return_index=True)
    pos = pos[np.sort(first)]
    sc = draw(hnp.arrays(float, (len(pos),), elements=st.floats(0.01, 100)))
    return Pattern(pos, sc, dim=dim)


def same(a, b, atol=1e-9):
    """Pointwise closeness in storage order (operations here preserve order)."""
    return (len(a) == len(b) and np.allclose(a.positions, b.positions, rtol=0, atol=atol)
            and np.allclose(a.scores, b.scores, rtol=1e-12, atol=0))


vectors = hnp.arrays(float, (2,), elements=st.floats(-20, 20))
dyadic_vectors = hnp.arrays(float, (2,), elements=st.integers(-160, 160).map(lambda i: i / 8))
positive = st.floats(0.05, 20)


class TestConstruction:
    def test_rejects_duplicates(self):
        with pytest.raises(DataError):
            Pattern([[0.0], [0.0]], [1.0, 2.0])

    def test_rejects_negative_score(self):
        with pytest.raises(DataError):
            Pattern([[0.0]], [-1.0])

    def test_rejects_nonfinite(self):
        with pytest.raises(DataError):
            Pattern([[np.nan]], [1.0])

    def test_drops_zero_scores(self):
        p = Pattern([[0.0], [1.0]], [0.0, 2.0])
        assert len(p) == 1 and p.scores[0] == 2.0

    def test_immutable(self):
        p = P([((0.0,), 1.0)])
        with pytest.raises(ValueError):
            p.scores[0] = 3.0
        with pytest.raises(AttributeError):
            p.scores = np.ones(1)

    def test_empty_needs_dim(self):
        assert Pattern.empty(3).dim == 3

    def test_scaling_map_positive(self):
        with pytest.raises(DataError):
            ScalingMap(0.0, 1.0)


class TestShiftScale:
    def test_shift_example(self):
        p = P([((0.0,), 1.0), ((1.0,), 2.0)])
        assert shift(p, [1.0]) == P([((-1.0,), 1.0), ((0.0,), 2.0)])

    def test_shift_dimension_mismatch(self):
        with pytest.raises(DataError):
            shift(P([((0.0, 0.0), 1.0)]), [1.0])

    def test_scale_example(self):
        assert scale(P([((2.0,), 4.0)]), ScalingMap(2.0, 4.0)) == P([((1.0,), 1.0)])

    @given(patterns())
    def test_identities(self, p):
        assert shift(p, np.zeros(2)) == p
        assert scale(p, ScalingMap(1.0, 1.0)) == p

    @given(patterns(), vectors)
    def test_shift_group(self, p, z):
        assert same(shift(shift(p, z), -z), p)

    @given(patterns(), positive, positive)
    def test_scale_inverse(self, p, v, u):
        m = ScalingMap(v, u)
        assert same(scale(scale(p, m), m.inverse()), p)

    @given(patterns(), vectors, positive, positive)
    def test_shift_scale_commute(self, p, z, v, u):
        m = ScalingMap(v, u)
        assert same(scale(shift(p, z), m), shift(scale(p, m), z / v))

    def test_shift_moves_domain(self):
        w = SimWindow.cube(10.0, 1)
        p = Pattern([[3.0]], [1.0], domain=w)
        assert shift(p, [1.0]).domain.lower == (-1.0,)


class TestRestrictMax:
    p = P([((0.0,), 0.5), ((3.0,), 2.0)])

    def test_ball(self):
        assert restrict(self.p, Ball((0.0,), 1.0)) == P([((0.0,), 0.5)])

    def test_floor(self):
        assert restrict(self.p, None, 1.0) == P([((3.0,), 2.0)])

    def test_floor_above_max(self):
        assert len(restrict(self.p, None, 2.0)) == 0

    def test_box_closed(self):
        assert len(restrict(self.p, Box((0.0,), (3.0,)))) == 2

    @given(patterns(), st.floats(0, 50), st.floats(0, 50))
    def test_monotone_floor(self, p, a, b):
        lo, hi = sorted((a, b))
        big, small = restrict(p, None, lo), restrict(p, None, hi)
        assert {tuple(t) for t, _ in small} <= {tuple(t) for t, _ in big}

    def test_max_score(self):
        assert max_score(P([((0.0,), 1.0), ((1.0,), 3.0)])) == 3.0
        assert max_score(Pattern.empty(1)) == 0.0

    @given(patterns(), positive, positive)
    def test_max_homogeneous(self, p, v, u):
        assert max_score(scale(p, ScalingMap(v, u))) == pytest.approx(max_score(p) / u)


class TestAnchors:
    def test_first_max_tie(self):
        p = P([((1.0, 0.0), 2.0), ((0.0, 1.0), 2.0)])
        np.testing.assert_array_equal(anchor_first_max(p), [0.0, 1.0])

    def test_first_max_single(self):
        np.testing.assert_array_equal(anchor_first_max(P([((4.0, 2.0), 1.0)])), [4.0, 2.0])

    def test_first_max_empty(self):
        with pytest.raises(DomainError):
            anchor_first_max(Pattern.empty(2))

    def test_first_exceedance(self):
        p = P([((2.0,), 0.5), ((1.0,), 3.0)])
        np.testing.assert_array_equal(anchor_first_exceedance(p, 1.0), [1.0])

    def test_no_exceedance_is_origin(self):
        p = P([((2.0,), 0.5), ((1.0,), 3.0)])
        np.testing.assert_array_equal(anchor_first_exceedance(p, 3.0), [0.0])

    @given(patterns(elements=dyadic), dyadic_vectors)
    def test_first_max_equivariant(self, p, z):
        if len(p) == 0:
            return
        np.testing.assert_array_equal(anchor_first_max(shift(p, z)), anchor_first_max(p) - z)

    @given(patterns(elements=dyadic), dyadic_vectors, st.floats(0.01, 50))
    def test_first_exceedance_equivariant(self, p, z, y):
        if max_score(p) <= y:
            return
        np.testing.assert_array_equal(anchor_first_exceedance(shift(p, z), y),
                                      anchor_first_exceedance(p, y) - z)

    @given(patterns(), st.floats(0.01, 50))
    def test_anchor_is_exceedance(self, p, y):
        if max_score(p) <= y:
            return
        a = anchor_first_exceedance(p, y)
        assert p.score_at(a) > y

    def test_lexicographic_order(self):
        pos = np.array([[1.0, 0.0], [0.0, 2.0], [0.0, 1.0]])
        assert list(lexicographic_order(pos)) == [2, 1, 0]


class TestSerialization:
    def test_csv_header(self):
        text = to_csv(P([((0.1, 0.2), 3.0)]))
        assert text.splitlines()[0] == "x1,x2,score"

    @given(patterns())
    @settings(max_examples=50)
    def test_csv_roundtrip(self, p):
        assert from_csv(to_csv(p)) == p

    @given(patterns())
    @settings(max_examples=50)
    def test_json_roundtrip(self, p):
        assert from_json(to_json(p), dim=2) == p
        assert isinstance(json.loads(to_json(p)), list)

    def test_file_roundtrip(self, tmp_path):
        p = P([((0.1, 1 / 3), 2.0 / 7)])
        write_csv(p, tmp_path / "p.csv")
        assert read_csv(tmp_path / "p.csv") == p

    def test_bad_header(self):
        with pytest.raises(DataError):
            from_csv("a,b\n1,2\n")
