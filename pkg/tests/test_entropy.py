import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import center, make_trace
from stentropy.entropy import (
    Alignment,
    EntropyConfig,
    ProportionMode,
    TimeSliceSpec,
    build_slice_spec,
    compute_occupancy,
    compute_sequences,
    entropy_sequence,
    slice_entropy,
)
from stentropy.errors import DataError, OutOfBoundsError
from stentropy.grid import CellIndex
from stentropy.ingest import Trace


def c(i, j):
    return CellIndex(i, j)


class TestSliceSpec:
    def test_single_day(self, grid2):
        tr = make_trace("u", [(0, (0, 0)), (86399, (0, 0))], grid2)
        assert build_slice_spec(tr, 86400, Alignment.MIDNIGHT_UTC) == TimeSliceSpec(0, 86400, 1)

    def test_boundary_fix_opens_next_slice(self, grid2):
        tr = make_trace("u", [(0, (0, 0)), (86400, (0, 0))], grid2)
        assert build_slice_spec(tr).T == 2

    def test_midnight_alignment(self, grid2):
        # 2009-01-01T12:00Z and 2009-01-03T06:00Z
        tr = make_trace("u", [(1230811200, (0, 0)), (1230962400, (0, 0))], grid2)
        spec = build_slice_spec(tr, 86400, Alignment.MIDNIGHT_UTC)
        assert spec.origin == 1230768000  # 2009-01-01T00:00Z
        assert spec.T == 3

    def test_first_fix_alignment(self, grid2):
        tr = make_trace("u", [(1000, (0, 0)), (1000 + 86400, (0, 0))], grid2)
        spec = build_slice_spec(tr, 86400, Alignment.FIRST_FIX)
        assert (spec.origin, spec.T) == (1000, 2)

    def test_empty_trace(self):
        with pytest.raises(DataError):
            build_slice_spec(Trace("u", [], [], []))


class TestOccupancy:
    def test_short_interval(self, grid2):
        tr = make_trace("u", [(0, (1, 0)), (600, (0, 0))], grid2)
        occ = compute_occupancy(tr, grid2, TimeSliceSpec(0, 86400, 1), 3600)
        assert occ.slices[0] == {c(1, 0): 600}
        assert occ.covered == (600,)

    def test_gap_cap(self, grid2):
        tr = make_trace("u", [(0, (1, 0)), (7200, (0, 0))], grid2)
        occ = compute_occupancy(tr, grid2, TimeSliceSpec(0, 86400, 1), 3600)
        assert occ.slices[0] == {c(1, 0): 3600}

    def test_split_across_midnight(self, grid2):
        tr = make_trace("u", [(86000, (1, 1)), (86800, (1, 1))], grid2)
        occ = compute_occupancy(tr, grid2, TimeSliceSpec(0, 86400, 2), 3600)
        assert occ.slices == ({c(1, 1): 400}, {c(1, 1): 400})

    def test_split_over_several_slices(self, grid2):
        tr = make_trace("u", [(0, (0, 1)), (10_000, (0, 0))], grid2)
        occ = compute_occupancy(tr, grid2, TimeSliceSpec(0, 3600, 3), 20_000)
        assert occ.covered == (3600, 3600, 2800)

    def test_count_mode(self, grid2):
        tr = make_trace("u", [(0, (0, 0)), (10, (0, 0)), (20, (1, 1))], grid2)
        occ = compute_occupancy(tr, grid2, TimeSliceSpec(0, 86400, 1), mode=ProportionMode.COUNT)
        assert occ.slices[0] == {c(0, 0): 2, c(1, 1): 1}

    def test_outside_fix_owns_nothing(self, grid2):
        lat, lon = center(grid2, 0, 0)
        tr = Trace("u", [0, 100, 200], [lat, grid2.max_lat + 1, lat], [lon, lon, lon])
        occ = compute_occupancy(tr, grid2, TimeSliceSpec(0, 86400, 1))
        assert occ.slices[0] == {c(0, 0): 100}
        assert occ.dropped_outside == 1
        with pytest.raises(OutOfBoundsError):
            compute_occupancy(tr, grid2, TimeSliceSpec(0, 86400, 1), outside="error")

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 300_000), st.integers(0, 1), st.integers(0, 1)),
                    min_size=1, max_size=40, unique_by=lambda x: x[0]),
           st.integers(60, 20_000))
    def test_conservation(self, grid2, fixes, gap):
        fixes = sorted(fixes)
        tr = make_trace("u", [(t, (i, j)) for t, i, j in fixes], grid2)
        spec = build_slice_spec(tr)
        occ = compute_occupancy(tr, grid2, spec, gap)
        for cells, covered in zip(occ.slices, occ.covered):
            assert sum(cells.values()) == covered <= spec.duration
            assert all(isinstance(v, int) and v > 0 for v in cells.values())
        expected = sum(min(b - a, gap) for (a, *_), (b, *_) in zip(fixes, fixes[1:]))
        assert sum(occ.covered) == expected


class TestSliceEntropy:
    def test_single_cell(self, grid3):
        assert slice_entropy({c(2, 1): 500}, grid3) == 0.0

    def test_uniform(self, grid3):
        occ = {c(i, j): 7 for i in range(3) for j in range(3)}
        assert slice_entropy(occ, grid3) == pytest.approx(100.0, abs=1e-9)

    def test_two_halves_on_2x2(self, grid2):
        assert slice_entropy({c(0, 0): 30, c(1, 1): 30}, grid2) == pytest.approx(50.0, abs=1e-9)

    def test_three_cells_on_3x3(self, grid3):
        # (1.5 ln 2) / ln 9 * 100
        value = slice_entropy({c(0, 0): 2, c(1, 0): 1, c(2, 2): 1}, grid3)
        assert value == pytest.approx(47.319731517859296, abs=1e-9)

    def test_empty_is_missing(self, grid2):
        assert slice_entropy({}, grid2) is None

    def test_zero_weights_ignored(self, grid2):
        assert slice_entropy({c(0, 0): 5, c(0, 1): 0}, grid2) == 0.0


weights = st.dictionaries(st.integers(0, 99), st.integers(0, 10**6), min_size=1, max_size=40)


@settings(max_examples=300, deadline=None)
@given(weights, st.integers(2, 100))
def test_bounds_and_base_invariance(w, n_cells):
    w = {k: v for k, v in w.items() if k < n_cells}
    h = slice_entropy(w, n_cells)
    if sum(w.values()) == 0:
        assert h is None
        return
    assert 0.0 <= h <= 100.0
    for base in (2, 10, math.e):
        assert abs(slice_entropy(w, n_cells, base=base) - h) < 1e-9


@given(st.lists(st.integers(1, 1000), min_size=1, max_size=9), st.randoms())
def test_permutation_invariance(values, rnd):
    cells = list(range(9))
    rnd.shuffle(cells)
    a = slice_entropy(dict(enumerate(values)), 9)
    b = slice_entropy(dict(zip(cells, values)), 9)
    assert a == pytest.approx(b, abs=1e-12)


@given(st.lists(st.integers(1, 1000), min_size=2, max_size=4), st.integers(4, 50))
def test_refinement_lowers_entropy(values, n_cells):
    occ = dict(enumerate(values))
    low, high = slice_entropy(occ, n_cells + 1), slice_entropy(occ, n_cells)
    if high > 0:
        assert low < high


class TestSequence:
    def test_stationary_user(self, grid2):
        fixes = [(t, (0, 0)) for t in range(0, 3 * 86400, 1800)]
        tr = make_trace("u", fixes, grid2)
        seq = entropy_sequence(tr, grid2, build_slice_spec(tr))
        assert seq.values == (0.0, 0.0, 0.0)

    def test_missing_middle_day(self, grid2):
        # last fix of day 0 at 22:00 so its capped hour ends before midnight
        day0 = [(t, ((t // 3600) % 2, 0)) for t in range(0, 79201, 1800)]
        day2 = [(2 * 86400 + t, ((t // 3600) % 2, 0)) for t in range(0, 86400, 1800)]
        tr = make_trace("u", day0 + day2, grid2)
        seq = entropy_sequence(tr, grid2, build_slice_spec(tr), max_gap=3600)
        assert seq.values[1] is None
        assert seq.values[0] is not None and seq.values[2] is not None
        assert seq.present() == [0, 2]

    def test_commuter_alternating_two_cells(self, grid2):
        # 12 h in each of two cells every day, fixes every 30 min
        fixes = [(t, (0, 0) if (t % 86400) < 43200 else (1, 1)) for t in range(0, 4 * 86400 + 1, 1800)]
        tr = make_trace("u", fixes, grid2)
        seq = entropy_sequence(tr, grid2, build_slice_spec(tr))
        present = [v for v in seq.values if v is not None]
        assert len(present) == 4
        for v in present:
            assert v == pytest.approx(50.0, abs=1e-9)

    def test_deterministic(self, synth_a_small):
        ds, grid = synth_a_small
        a = compute_sequences(ds.traces, grid, EntropyConfig())
        b = compute_sequences(ds.traces, grid, EntropyConfig())
        assert a == b

    def test_count_mode_equals_dwell_for_regular_sampling(self, grid2):
        fixes = [(t, ((t // 7200) % 2, 0)) for t in range(0, 86400 + 1, 600)]
        tr = make_trace("u", fixes, grid2)
        spec = build_slice_spec(tr)
        dwell = entropy_sequence(tr, grid2, spec).values[0]
        count = entropy_sequence(tr, grid2, spec, mode=ProportionMode.COUNT).values[0]
        assert dwell == pytest.approx(50.0)
        assert count == pytest.approx(50.0)
