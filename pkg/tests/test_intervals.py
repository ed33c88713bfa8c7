import math

import pytest
from hypothesis import given, strategies as st

from temposcore import Interval, IntervalSet, iou, merge, set_iou


def ivs(pairs):
    return [Interval(s, e) for s, e in pairs]


def positive_interval(max_t=100.0):
    return (
        st.tuples(
            st.floats(0.0, max_t, allow_nan=False, allow_infinity=False),
            st.floats(0.0, max_t, allow_nan=False, allow_infinity=False),
        )
        .map(lambda p: Interval(min(p), max(p)))
    )


# timestamps at millisecond resolution: differences stay far above the ulp,
# so strict comparisons in the iff-style properties are meaningful
grid_times = st.floats(0.0, 100.0, allow_nan=False).map(lambda t: round(t, 3))
grid_interval = st.tuples(grid_times, grid_times).map(lambda p: Interval(min(p), max(p)))
positive_length_interval = grid_interval.filter(lambda iv: iv.length > 0)


class TestIntervalValidity:
    def test_zero_length_allowed(self):
        assert Interval(3.0, 3.0).length == 0.0

    def test_end_before_start_rejected(self):
        with pytest.raises(ValueError):
            Interval(5.0, 4.0)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            Interval(-1.0, 4.0)

    @pytest.mark.parametrize("bad", [math.nan, math.inf])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(ValueError):
            Interval(0.0, bad)

    def test_endpoints_coerced_to_float(self):
        iv = Interval(1, 2)
        assert isinstance(iv.start, float) and isinstance(iv.end, float)


class TestIou:
    def test_identity(self):
        assert iou(Interval(0, 10), Interval(0, 10)) == 1.0

    def test_disjoint(self):
        assert iou(Interval(0, 10), Interval(20, 30)) == 0.0

    def test_partial_overlap(self):
        # overlap 5 over a span of 15
        assert iou(Interval(0, 10), Interval(5, 15)) == pytest.approx(1 / 3, abs=1e-12)

    def test_identical_degenerate_points(self):
        assert iou(Interval(5, 5), Interval(5, 5)) == 1.0

    def test_distinct_degenerate_points(self):
        assert iou(Interval(5, 5), Interval(7, 7)) == 0.0

    def test_point_inside_interval_scores_zero(self):
        assert iou(Interval(5, 5), Interval(0, 10)) == 0.0

    @given(positive_interval(), positive_interval())
    def test_symmetric(self, a, b):
        assert iou(a, b) == iou(b, a)

    @given(positive_interval(), positive_interval())
    def test_bounded(self, a, b):
        assert 0.0 <= iou(a, b) <= 1.0

    @given(positive_interval())
    def test_self_iou_is_one(self, a):
        assert iou(a, a) == 1.0


class TestMerge:
    def test_overlap_chain(self):
        assert merge(ivs([(0, 2), (1, 5), (7, 8)])).intervals == tuple(ivs([(0, 5), (7, 8)]))

    def test_empty(self):
        assert merge([]).intervals == ()

    def test_singleton(self):
        assert merge(ivs([(3, 4)])).intervals == (Interval(3, 4),)

    def test_touching_endpoints_coalesce(self):
        assert merge(ivs([(0, 2), (2, 4)])).intervals == (Interval(0, 4),)

    def test_unsorted_input(self):
        assert merge(ivs([(7, 8), (1, 5), (0, 2)])).intervals == tuple(ivs([(0, 5), (7, 8)]))

    def test_constructor_rejects_non_canonical(self):
        with pytest.raises(ValueError):
            IntervalSet(tuple(ivs([(0, 2), (1, 3)])))
        with pytest.raises(ValueError):
            IntervalSet(tuple(ivs([(0, 2), (2, 3)])))

    @given(st.lists(positive_interval(), max_size=12))
    def test_idempotent(self, xs):
        once = merge(xs)
        assert merge(once.intervals) == once

    @given(st.lists(positive_interval(), max_size=12))
    def test_measure_at_most_sum_of_lengths(self, xs):
        merged = merge(xs)
        total = sum(iv.length for iv in xs)
        assert merged.measure <= total + 1e-9

    @given(st.lists(grid_interval, max_size=10))
    def test_measure_equality_iff_overlap_free(self, xs):
        def overlap(a, b):
            return max(0.0, min(a.end, b.end) - max(a.start, b.start))

        overlap_free = all(
            overlap(a, b) == 0.0 for i, a in enumerate(xs) for b in xs[i + 1 :]
        )
        merged = merge(xs)
        total = sum(iv.length for iv in xs)
        if overlap_free:
            assert merged.measure == pytest.approx(total, abs=1e-9)
        else:
            assert merged.measure < total

    @given(st.lists(positive_interval(), min_size=1, max_size=12))
    def test_covers_all_endpoints(self, xs):
        merged = merge(xs)

        def contains(t):
            return any(iv.start <= t <= iv.end for iv in merged.intervals)

        for iv in xs:
            assert contains(iv.start) and contains(iv.end)


class TestSetIou:
    def test_partial(self):
        a = merge(ivs([(0, 2), (4, 6)]))
        b = merge(ivs([(1, 5)]))
        # intersection [1,2] + [4,5] = 2; union [0,6] = 6
        assert set_iou(a, b) == pytest.approx(1 / 3, abs=1e-12)

    def test_identity(self):
        a = merge(ivs([(0, 3)]))
        assert set_iou(a, a) == 1.0

    def test_empty_vs_nonempty(self):
        assert set_iou(merge([]), merge(ivs([(0, 3)]))) == 0.0

    def test_both_empty_scores_zero(self):
        assert set_iou(merge([]), merge([])) == 0.0

    def test_identical_degenerate_sets(self):
        a = merge(ivs([(2, 2)]))
        assert set_iou(a, a) == 1.0

    @given(st.lists(positive_interval(), max_size=8), st.lists(positive_interval(), max_size=8))
    def test_symmetric(self, xs, ys):
        a, b = merge(xs), merge(ys)
        assert set_iou(a, b) == pytest.approx(set_iou(b, a), abs=1e-12)

    @given(
        st.lists(positive_length_interval, min_size=1, max_size=8),
        st.lists(positive_length_interval, min_size=1, max_size=8),
    )
    def test_one_iff_identical_point_sets(self, xs, ys):
        # positive-length members: a zero-measure sliver is invisible to any
        # measure ratio, so the iff only holds without isolated points
        a, b = merge(xs), merge(ys)
        assert (set_iou(a, b) == 1.0) == (a.intervals == b.intervals)

    @given(
        st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), max_size=8),
        st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), max_size=8),
    )
    def test_matches_unit_grid_oracle(self, xs, ys):
        """On integer-grid intervals, set IoU equals counting covered unit cells."""
        a = merge(Interval(min(p), max(p)) for p in xs)
        b = merge(Interval(min(p), max(p)) for p in ys)

        def cells(s):
            covered = set()
            for iv in s.intervals:
                covered.update(range(int(iv.start), int(iv.end)))
            return covered

        ca, cb = cells(a), cells(b)
        union = len(ca | cb)
        expected = (len(ca & cb) / union) if union else (
            1.0 if (a.intervals and a.intervals == b.intervals) else 0.0
        )
        assert set_iou(a, b) == pytest.approx(expected, abs=1e-6)
