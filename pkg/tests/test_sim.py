import math

import numpy as np
import pytest

from quadhmm.baselines import trilaterate
from quadhmm.errors import ZeroLengthPath
from quadhmm.grid import build_grid, locate
from quadhmm.models import Anchor, HmmParams
from quadhmm.sim import EventWindow, Track, gen_trajectory, random_waypoints, simulate_ranges, walking_scenario
from quadhmm.viterbi import decode

CORNERS = [Anchor(1, (0.0, 0.0)), Anchor(2, (8.0, 0.0)), Anchor(3, (0.0, 8.0))]


def test_segment_sampling():
    tr = gen_trajectory([(0, 0), (1, 0)], 0.5, 0.1)
    assert len(tr) == 21
    np.testing.assert_allclose(np.diff(tr.positions[:, 0]), 0.05, atol=1e-12)
    np.testing.assert_array_equal(tr.positions[-1], [1.0, 0.0])
    assert tr.times[-1] == pytest.approx(1.0 / 0.5)


def test_closed_loop():
    tr = gen_trajectory([(1, 1), (3, 1), (3, 2), (1, 1)], 0.5, 0.1)
    np.testing.assert_array_equal(tr.positions[0], tr.positions[-1])


def test_zero_length_path():
    with pytest.raises(ZeroLengthPath):
        gen_trajectory([(1, 1), (1, 1)], 0.5, 0.1)


def test_noiseless_ranges_exact():
    tr = gen_trajectory([(1, 1), (6, 5)], 0.5, 0.1)
    frames = simulate_ranges(tr, CORNERS, 0.0)
    for f, p in zip(frames, tr.positions):
        for a in CORNERS:
            assert f.ranges[a.id] == pytest.approx(math.dist(p, a.position), abs=1e-12)
        assert np.max(np.abs(trilaterate(f, CORNERS) - p)) <= 1e-9


def test_noiseless_viterbi_recovers_cells():
    g = build_grid((0, 0), (8, 8), 0.8)
    tr = gen_trajectory([(1.2, 1.2), (1.2, 6.8)], 0.5, 0.1)
    frames = simulate_ranges(tr, CORNERS, 0.0)
    traj = decode(g, frames, CORNERS, HmmParams(sigma_x=2.0, sigma_o=0.05))
    for c, p in zip(traj.cells, tr.positions):
        frac = (p[1] / 0.8) % 1.0
        if 0.2 < frac < 0.8:  # away from cell-boundary ambiguity
            assert c == locate(g, p)


def test_dropout_window():
    sc = walking_scenario(seed=0, steps=350, events=[EventWindow(1, 27.0, 29.5)])
    for f in sc.frames:
        inside = 27.0 - 1e-9 <= f.time <= 29.5 + 1e-9
        assert f.anchor_count == (2 if inside else 3)
        assert (1 in f.ranges) != inside


def test_dropout_leaves_other_noise_unchanged():
    tr = gen_trajectory([(1, 1), (6, 5)], 0.5, 0.1)
    plain = simulate_ranges(tr, CORNERS, 0.5, seed=3)
    dropped = simulate_ranges(tr, CORNERS, 0.5, [EventWindow(2, 1.0, 2.0)], seed=3)
    for a, b in zip(plain, dropped):
        assert {k: v for k, v in a.ranges.items() if k in b.ranges} == b.ranges


def test_bias_window():
    tr = gen_trajectory([(1, 1), (6, 5)], 0.5, 0.1)
    plain = simulate_ranges(tr, CORNERS, 0.2, seed=1)
    biased = simulate_ranges(tr, CORNERS, 0.2, [EventWindow.bias(1, 1.0, 2.0, 1.5)], seed=1)
    for a, b in zip(plain, biased):
        shift = 1.5 if 1.0 <= a.time <= 2.0 else 0.0
        assert b.ranges[1] == pytest.approx(a.ranges[1] + shift, abs=1e-12) or b.ranges[1] == 0.0
        assert b.ranges[2] == a.ranges[2]


def test_negative_ranges_clamped():
    tr = Track(np.arange(200) * 0.1, np.zeros((200, 2)))
    frames = simulate_ranges(tr, CORNERS, 1.0, seed=0)
    assert min(f.ranges[1] for f in frames) == 0.0


def test_noise_std():
    tr = Track(np.arange(4000) * 0.1, np.full((4000, 2), 4.0))
    frames = simulate_ranges(tr, CORNERS, 0.5, seed=11)
    err = [f.ranges[a.id] - math.dist((4, 4), a.position) for f in frames for a in CORNERS]
    assert len(err) >= 10_000
    assert abs(np.std(err) - 0.5) <= 0.05 * 0.5


def test_determinism():
    a = walking_scenario(seed=5, steps=100)
    b = walking_scenario(seed=5, steps=100)
    assert a == b
    assert a != walking_scenario(seed=6, steps=100)


def test_walk_stays_inside():
    sc = walking_scenario(seed=1, steps=600)
    assert len(sc.truth) == 600
    assert np.all((sc.truth.positions >= 1.0) & (sc.truth.positions <= 7.0))


def test_event_validation():
    with pytest.raises(ValueError):
        EventWindow(1, 3.0, 3.0)
    with pytest.raises(ValueError):
        EventWindow(1, 1.0, 2.0, kind="spike")
    with pytest.raises(ValueError):
        random_waypoints(np.random.default_rng(0), (1, 1), (1, 1), 5.0)
