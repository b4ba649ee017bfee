from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from turnid.timeline import (
    Segment,
    TimeGrid,
    Timeline,
    cotemporal_regions,
    crop,
    crop_timeline,
    gaps,
    overlap_duration,
    seg,
    support,
)

from .conftest import ann, annotations


def tl(*pairs):
    return Timeline(seg(a, b) for a, b in pairs)


class TestSegment:
    def test_rejects_empty_and_reversed(self):
        with pytest.raises(ValueError):
            seg(1, 1)
        with pytest.raises(ValueError):
            seg(2, 1)

    def test_rejects_negative_start(self):
        with pytest.raises(ValueError):
            seg(-1, 1)

    def test_duration_exact_in_ticks(self):
        s = seg(0.1, 0.3)
        assert s.duration == 2000
        assert s.duration_sec == 0.2


class TestCrop:
    def test_partial(self):
        assert crop(ann("f", ("A", 0, 10)), seg(5, 20)) == ann("f", ("A", 5, 10))

    def test_identity(self):
        a = ann("f", ("A", 0, 10), ("B", 8, 12))
        assert crop(a, seg(0, 12)) == a

    def test_disjoint(self):
        assert len(crop(ann("f", ("A", 0, 4)), seg(5, 6))) == 0

    @given(annotations(), st.integers(0, 100_000), st.integers(1, 100_000))
    def test_idempotent(self, a, lo, width):
        extent = Segment(lo, lo + width)
        once = crop(a, extent)
        assert crop(once, extent) == once


class TestSupport:
    @pytest.mark.parametrize(
        "pairs, expected",
        [
            ([(0, 2), (1, 3)], [(0, 3)]),
            ([(0, 2), (2, 5)], [(0, 5)]),
            ([(0, 1), (2, 3)], [(0, 1), (2, 3)]),
        ],
    )
    def test_examples(self, pairs, expected):
        assert support(tl(*pairs)) == tl(*expected)

    @given(annotations())
    def test_idempotent_and_disjoint(self, a):
        s = support(a.timeline())
        assert support(s) == s
        assert all(x.end < y.start for x, y in zip(s, list(s)[1:]))


class TestGaps:
    def test_examples(self):
        assert gaps(tl((1, 2)), seg(0, 3)) == tl((0, 1), (2, 3))
        assert gaps(Timeline(), seg(0, 3)) == tl((0, 3))
        assert gaps(tl((0, 3)), seg(0, 3)) == Timeline()

    @given(annotations(), st.integers(0, 100_000), st.integers(1, 150_000))
    def test_complement_properties(self, a, lo, width):
        extent = Segment(lo, lo + width)
        t = a.timeline()
        g = gaps(t, extent)
        covered = crop_timeline(support(t), extent)
        assert support(list(g) + list(covered)) == Timeline([extent])
        assert sum(x.duration for x in g) + sum(x.duration for x in covered) == extent.duration
        assert gaps(g, extent) == covered


class TestAnnotation:
    def test_same_label_overlap_rejected(self):
        with pytest.raises(ValueError, match="overlaps itself"):
            ann("f", ("A", 0, 5), ("A", 4, 6))

    def test_nested_same_label_overlap_rejected(self):
        with pytest.raises(ValueError):
            ann("f", ("A", 0, 10), ("B", 1, 2), ("A", 5, 6))

    def test_abutting_same_label_kept_apart(self):
        a = ann("f", ("A", 0, 2), ("A", 2, 5))
        assert len(a) == 2
        assert support(a.timeline()) == tl((0, 5))

    def test_label_duration(self):
        a = ann("f", ("A", 0, 2), ("B", 1, 4), ("A", 3, 3.5))
        assert a.label_duration("A") == seg(0, 2.5).duration

    def test_overlap_duration(self):
        assert overlap_duration(ann("f", ("A", 0, 10), ("B", 5, 12))) == seg(5, 10).duration


class TestCotemporal:
    def test_boundary_split(self):
        regions = cotemporal_regions(ann("f", ("A", 0, 10)), ann("f", ("A", 0, 8), ("B", 8, 10)), seg(0, 10))
        assert regions == [
            (seg(0, 8), frozenset("A"), frozenset("A")),
            (seg(8, 10), frozenset("A"), frozenset("B")),
        ]

    def test_overlap_grid(self):
        # endpoint grid {0, 5, 10}
        regions = cotemporal_regions(ann("f", ("A", 0, 10), ("B", 5, 10)), ann("f", ("A", 0, 10)), seg(0, 10))
        assert regions == [
            (seg(0, 5), frozenset("A"), frozenset("A")),
            (seg(5, 10), frozenset("AB"), frozenset("A")),
        ]

    @given(annotations())
    def test_identity(self, a):
        for _, r, h in cotemporal_regions(a, a, Segment(0, 250_000)):
            assert r == h

    @given(annotations(), annotations(), st.integers(0, 50_000), st.integers(1, 250_000))
    def test_partition(self, ref, hyp, lo, width):
        extent = Segment(lo, lo + width)
        regions = cotemporal_regions(ref, hyp, extent)
        assert sum(r.duration for r, _, _ in regions) == extent.duration
        assert regions[0][0].start == extent.start and regions[-1][0].end == extent.end
        assert all(x[0].end == y[0].start for x, y in zip(regions, regions[1:]))

    @given(annotations(), annotations())
    def test_pure(self, ref, hyp):
        extent = Segment(0, 250_000)
        assert cotemporal_regions(ref, hyp, extent) == cotemporal_regions(ref, hyp, extent)

    @given(annotations(), annotations())
    def test_label_sets_match_grid_cells(self, ref, hyp):
        extent = Segment(0, 250_000)
        grid = TimeGrid.from_annotations(extent, ref, hyp)
        regions = cotemporal_regions(ref, hyp, extent)
        for cell in grid.cells():
            mid = cell.start
            region = next(r for r in regions if r[0].start <= mid < r[0].end)
            active_ref = {lab for s, lab in ref if s.start <= mid < s.end}
            active_hyp = {lab for s, lab in hyp if s.start <= mid < s.end}
            assert region[1] == active_ref and region[2] == active_hyp


def test_timegrid_rejects_unsorted():
    with pytest.raises(ValueError):
        TimeGrid((0, 5, 5))
