import numpy as np
import pytest

from landaulab.intervals import INFINITY, IntervalUnion, union_overlapping


class TestIntervals:
    @pytest.mark.parametrize(
        "intervals, merged",
        [
            ([(3, 4), (1, 2)], [(1.0, 2.0), (3.0, 4.0)]),
            ([(1, 3), (2, 4)], [(1.0, 4.0)]),
            ([(1, 2), (2, 3)], [(1.0, 3.0)]),
            ([(1, 5), (2, 3)], [(1.0, 5.0)]),
            ([(1, 1)], [(1.0, 1.0)]),
            ([], []),
        ],
    )
    def test_union_overlapping(self, intervals, merged):
        assert union_overlapping(intervals) == merged

    def test_reversed_interval(self):
        with pytest.raises(ValueError):
            union_overlapping([(2, 1)])

    def test_truncate(self):
        union = IntervalUnion([(1, 2), (3, 5), (6, 7)])
        assert union.truncate(4) == IntervalUnion([(1, 2), (3, 4)])
        assert len(union.truncate(0.5)) == 0

    def test_distances(self):
        union = IntervalUnion([(1, 2), (4, 5)])
        np.testing.assert_allclose(union.distances([0.0, 1.5, 2.5, 3.5, 6.0]), [1.0, 0.0, 0.5, 0.5, 1.0])
        assert union.distance(3.0) == 1.0
        assert IntervalUnion().distance(0.0) == INFINITY

    def test_membership(self):
        union = IntervalUnion([(1, 2)])
        assert 1.0 in union
        assert 2.0 in union
        assert 2.1 not in union
        assert union.contains(2.1, tolerance=0.2)

    def test_component_index(self):
        union = IntervalUnion([(1, 2), (4, 5)])
        assert union.component_index(1.5) == 0
        assert union.component_index(5.1, tolerance=0.2) == 1
        assert union.component_index(3.0, tolerance=0.5) is None

    def test_gaps(self):
        union = IntervalUnion([(1, 2), (4, 5)])
        assert union.gaps() == [(2.0, 4.0)]
        assert union.min_gap() == 2.0
        assert IntervalUnion([(1, 2)]).min_gap() == INFINITY

    def test_widths_and_serialization(self):
        union = IntervalUnion([(4, 5.5), (1, 2)])
        assert union.widths() == [1.0, 1.5]
        assert union.to_list() == [[1.0, 2.0], [4.0, 5.5]]
