import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quadhmm.errors import InvalidLevels, LevelOutOfRange, NonTiling, OutOfBounds
from quadhmm.grid import build_grid, build_ladder, children, children_many, locate, locate_many, parent


def test_room_grids():
    g = build_grid((0, 0), (8, 8), 0.1)
    assert g.dims == (80, 80) and g.cell_count == 6400
    assert build_grid((0, 0), (12, 12), 0.1).cell_count == 14400


def test_single_cell_grid():
    g = build_grid((0, 0), (1, 1), 1.0)
    assert g.dims == (1, 1)
    np.testing.assert_array_equal(g.cell_center(0), [0.5, 0.5])


def test_non_tiling_rejected():
    with pytest.raises(NonTiling):
        build_grid((0, 0), (8, 8), 0.3)
    with pytest.raises(NonTiling):
        build_ladder((0, 0), (1, 1), 0.1, 3)  # 0.4 does not tile 1 m


def test_row_major_centers():
    g = build_grid((1.0, -2.0), (0.6, 0.4), 0.2)
    assert g.dims == (3, 2)
    for i in range(g.cell_count):
        ix, iy = g.cell_xy(i)
        assert i == iy * 3 + ix
        np.testing.assert_allclose(g.cell_center(i), [1.0 + (ix + 0.5) * 0.2, -2.0 + (iy + 0.5) * 0.2])
        x, y = g.cell_center(i)
        assert 1.0 < x < 1.6 and -2.0 < y < -1.6


def test_ladder_resolutions():
    lad = build_ladder((0, 0), (8, 8), 0.1, 4)
    np.testing.assert_allclose([lv.resolution for lv in lad.levels], [0.8, 0.4, 0.2, 0.1])
    assert lad.coarsest.cell_count == 100
    assert build_ladder((0, 0), (12, 12), 0.1, 4).coarsest.dims == (15, 15)
    for k in range(1, 4):
        assert lad[k].dims == (2 * lad[k - 1].nx, 2 * lad[k - 1].ny)


def test_ladder_of_one_matches_grid():
    assert build_ladder((0, 0), (4, 2), 0.5, 1).levels[0] == build_grid((0, 0), (4, 2), 0.5)


def test_invalid_levels():
    with pytest.raises(InvalidLevels):
        build_ladder((0, 0), (8, 8), 0.1, 0)


def test_corner_children_order():
    lad = build_ladder((0, 0), (2, 2), 0.5, 2)  # level 0 is 2x2, level 1 is 4x4
    kids = children(lad, 0, 0)
    fine = lad[1]
    assert [fine.cell_xy(c) for c in kids] == [(0, 0), (1, 0), (0, 1), (1, 1)]  # SW, SE, NW, NE


def test_partition_and_roundtrip_exhaustive():
    lad = build_ladder((0, 0), (8, 8), 0.1, 4)
    for k in range(lad.r - 1):
        coarse, fine = lad[k], lad[k + 1]
        seen = np.zeros(fine.cell_count, dtype=int)
        for p in range(coarse.cell_count):
            kids = children(lad, k, p)
            seen[kids] += 1
            x0, y0, x1, y1 = coarse.cell_bounds(p)
            area = 0.0
            for c in kids:
                assert parent(lad, k + 1, c) == p
                a0, b0, a1, b1 = fine.cell_bounds(c)
                assert x0 - 1e-12 <= a0 and a1 <= x1 + 1e-12 and y0 - 1e-12 <= b0 and b1 <= y1 + 1e-12
                area += (a1 - a0) * (b1 - b0)
            assert area == pytest.approx((x1 - x0) * (y1 - y0), rel=1e-12)
        assert np.all(seen == 1)


def test_children_many_matches_scalar():
    lad = build_ladder((0, 0), (4, 4), 0.25, 3)
    parents = np.arange(lad[1].cell_count)
    many = children_many(lad, 1, parents)
    for p in parents:
        np.testing.assert_array_equal(many[p], children(lad, 1, p))


def test_parent_containment():
    lad = build_ladder((0, 0), (0.4, 0.4), 0.1, 2)
    child = locate(lad[1], (0.05, 0.05))
    assert parent(lad, 1, child) == locate(lad[0], (0.05, 0.05))


def test_level_errors():
    lad = build_ladder((0, 0), (1, 1), 0.5, 1)
    with pytest.raises(LevelOutOfRange):
        parent(lad, 0, 0)
    with pytest.raises(LevelOutOfRange):
        children(lad, 0, 0)


def test_locate_centers_and_edges():
    g = build_grid((0, 0), (1, 1), 0.1)
    for i in range(g.cell_count):
        assert locate(g, g.cell_center(i)) == i
    # shared vertical edge between cells 0 and 1 goes to the upper cell
    assert locate(g, (0.1, 0.05)) == 1
    with pytest.raises(OutOfBounds):
        locate(g, (1.5, 0.5))
    with pytest.raises(OutOfBounds):
        locate(g, (-0.01, 0.5))


@given(st.floats(0, 7.999), st.floats(0, 7.999))
def test_locate_matches_nearest_center(x, y):
    g = build_grid((0, 0), (8, 8), 0.4)
    i = locate(g, (x, y))
    c = g.centers
    d = np.hypot(c[:, 0] - x, c[:, 1] - y)
    # nearest center, with ties (points on edges) allowed to either side
    assert d[i] <= d.min() + 1e-9
    assert np.max(np.abs(g.cell_center(i) - (x, y))) <= 0.2 + 1e-9


def test_locate_many_agrees():
    g = build_grid((0, 0), (2, 2), 0.25)
    pts = np.random.default_rng(0).uniform(0, 2, (100, 2))
    np.testing.assert_array_equal(locate_many(g, pts), [locate(g, p) for p in pts])


@given(st.integers(1, 4), st.sampled_from([0.1, 0.25, 0.5]))
def test_each_parent_has_four_children(r, u):
    lad = build_ladder((0, 0), (u * 2 ** (r - 1) * 3, u * 2 ** (r - 1) * 2), u, r)
    for k in range(1, r):
        counts = np.bincount([parent(lad, k, c) for c in range(lad[k].cell_count)],
                             minlength=lad[k - 1].cell_count)
        assert np.all(counts == 4)
