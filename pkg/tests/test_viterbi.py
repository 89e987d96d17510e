import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_force_viterbi, linear_viterbi, path_score
from quadhmm.errors import EmptyFrame, EmptyTrellis
from quadhmm.grid import build_grid, locate
from quadhmm.models import Anchor, HmmParams, MeasurementFrame, grid_observation_logprobs, transition_matrix
from quadhmm.viterbi import Trellis, backtrack, decode, decode_tables, decode_trellis, init_column, step

ANCHORS = [Anchor(1, (0.0, 0.0)), Anchor(2, (2.0, 0.0)), Anchor(3, (0.0, 2.0))]
PARAMS = HmmParams()


def _exact_frame(t, point):
    return MeasurementFrame(t, {a.id: math.dist(point, a.position) for a in ANCHORS})


def _random_tables(rng, N, T, dyadic):
    if dyadic:  # exact sums, so ties are common and exact
        return -rng.integers(0, 6, (T, N)) / 4.0, -rng.integers(0, 6, (N, N)) / 4.0
    return -rng.exponential(1.0, (T, N)), -rng.exponential(1.0, (N, N))


@pytest.mark.parametrize("seed", range(40))
def test_tables_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.choice([2, 4, 9]))
    T = int(rng.integers(1, 5))
    log_obs, log_trans = _random_tables(rng, N, T, dyadic=seed % 2 == 0)
    cells, score, _ = decode_tables(log_obs, log_trans)
    want, best = brute_force_viterbi(log_obs, log_trans)
    assert score == best
    assert list(cells) == want
    assert path_score(log_obs, log_trans, cells) == score


@given(st.integers(0, 2**32 - 1))
def test_log_equals_linear(seed):
    rng = np.random.default_rng(seed)
    log_obs, log_trans = -rng.uniform(0, 5, (4, 9)), -rng.uniform(0, 5, (9, 9))
    cells, _, _ = decode_tables(log_obs, log_trans)
    assert list(cells) == linear_viterbi(np.exp(log_obs), np.exp(log_trans))


def test_init_column_peak_at_true_cell():
    g = build_grid((0, 0), (2, 2), 0.25)
    cell = 19
    tr = init_column(g, _exact_frame(0, g.cell_center(cell)), ANCHORS, PARAMS)
    rho = tr.last_column
    assert rho[cell] == 0.0 and np.all(np.delete(rho, cell) < 0)
    g3 = build_grid((0, 0), (0.75, 0.75), 0.25)
    frame = MeasurementFrame(0, {1: 0.4, 2: 1.5, 3: 1.2})
    tr3 = init_column(g3, frame, ANCHORS, PARAMS)
    for i in range(9):
        c = g3.cell_center(i)
        want = 0.0
        for a in ANCHORS:
            want += -(frame.ranges[a.id] - math.dist(c, a.position)) ** 2 / (2 * 0.5**2)
        assert tr3.last_column[i] == pytest.approx(want, abs=1e-12)


def test_single_cell_grid():
    g = build_grid((0, 0), (1, 1), 1.0)
    frames = [MeasurementFrame(t, {1: 1.0 + 0.1 * t}) for t in range(3)]
    tr = init_column(g, frames[0], ANCHORS, PARAMS)
    r0 = tr.last_column[0]
    step(tr, frames[1], ANCHORS, PARAMS)
    obs = grid_observation_logprobs(g, frames[1], ANCHORS, PARAMS)[0]
    assert tr.last_column[0] == obs + (r0 + transition_matrix(g, PARAMS)[0, 0])
    assert np.isfinite(tr.last_column[0])


def test_step_counts_n_squared():
    g = build_grid((0, 0), (2, 2), 0.5)
    frames = [_exact_frame(t, (1.1, 0.9)) for t in range(4)]
    tr = decode_trellis(g, frames, ANCHORS, PARAMS)
    assert tr.counters.transitions == 16**2 * 3
    assert tr.counters.observations == 16 * 4
    assert tr.counters.backpointer_cells == 16 * 4


def test_grid_decode_matches_brute_force():
    g = build_grid((0, 0), (1, 1), 0.5)
    rng = np.random.default_rng(3)
    frames = [MeasurementFrame(t, {a.id: float(rng.uniform(0, 2)) for a in ANCHORS}) for t in range(5)]
    traj = decode(g, frames, ANCHORS, PARAMS)
    log_obs = [grid_observation_logprobs(g, f, ANCHORS, PARAMS) for f in frames]
    want, best = brute_force_viterbi(log_obs, transition_matrix(g, PARAMS))
    assert list(traj.cells) == want
    assert traj.score == best
    np.testing.assert_array_equal(traj.positions, g.centers[traj.cells])


def test_single_frame_is_argmax():
    g = build_grid((0, 0), (2, 2), 0.25)
    f = MeasurementFrame(0, {1: 1.0, 2: 1.4})
    traj = decode(g, [f], ANCHORS, PARAMS)
    assert traj.cells.tolist() == [int(np.argmax(grid_observation_logprobs(g, f, ANCHORS, PARAMS)))]


def test_stationary_noiseless_target():
    g = build_grid((0, 0), (2, 2), 0.25)
    p = (1.3, 0.6)
    traj = decode(g, [_exact_frame(t, p) for t in range(6)], ANCHORS, PARAMS)
    assert set(traj.cells.tolist()) == {locate(g, p)}


def test_prefix_consistency():
    g = build_grid((0, 0), (2, 2), 0.25)
    rng = np.random.default_rng(9)
    frames = [MeasurementFrame(t, {a.id: float(rng.uniform(0.2, 2.5)) for a in ANCHORS}) for t in range(5)]
    grown = decode_trellis(g, frames[:4], ANCHORS, PARAMS)
    step(grown, frames[4], ANCHORS, PARAMS)
    fresh = decode_trellis(g, frames, ANCHORS, PARAMS)
    for a, b in zip(grown.columns, fresh.columns):
        np.testing.assert_array_equal(a, b)
    for a, b in zip(grown.backptrs, fresh.backptrs):
        np.testing.assert_array_equal(a, b)
    assert np.all(np.concatenate(fresh.columns) <= 0)


def test_low_memory_same_path():
    g = build_grid((0, 0), (2, 2), 0.25)
    frames = [_exact_frame(t, (0.2 + 0.05 * t, 1.0)) for t in range(8)]
    a = decode(g, frames, ANCHORS, PARAMS)
    b = decode(g, frames, ANCHORS, PARAMS, low_memory=True)
    np.testing.assert_array_equal(a.cells, b.cells)
    assert a.score == b.score


def test_constant_shift_invariance():
    rng = np.random.default_rng(1)
    log_obs, log_trans = -rng.exponential(1.0, (5, 6)), -rng.exponential(1.0, (6, 6))
    shifted = log_obs.copy()
    shifted[0] -= 7.25
    np.testing.assert_array_equal(decode_tables(log_obs, log_trans)[0], decode_tables(shifted, log_trans)[0])


def test_errors():
    g = build_grid((0, 0), (1, 1), 0.5)
    with pytest.raises(EmptyFrame):
        decode(g, [MeasurementFrame(0, {})], ANCHORS, PARAMS)
    with pytest.raises(EmptyTrellis):
        decode(g, [], ANCHORS, PARAMS)
    with pytest.raises(EmptyTrellis):
        backtrack(Trellis(g))
