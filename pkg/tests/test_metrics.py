import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from quadhmm.errors import LengthMismatch, TooShort
from quadhmm.grid import build_grid, build_ladder
from quadhmm.metrics import (adaptive_costs, conventional_costs, cost_report, evaluate, loop_closure_error,
                             resample_truth, rmse, stopwatch)
from quadhmm.viterbi import Counters

TRAJ = arrays(np.float64, st.tuples(st.integers(1, 30), st.just(2)), elements=st.floats(-50, 50))


def test_rmse_examples():
    t = np.array([[0.0, 0.0], [1.0, 2.0], [3.0, -1.0]])
    assert rmse(t, t) == 0.0
    assert rmse(t + [0.3, 0.4], t) == pytest.approx(0.5, abs=1e-15)
    assert rmse([[1.0, 0.0]], [[0.0, 0.0]]) == 1.0
    with pytest.raises(LengthMismatch):
        rmse(t, t[:2])


def test_lce_examples():
    assert loop_closure_error([[0, 0], [1, 1], [0, 0]]) == 0.0
    assert loop_closure_error([[0, 0], [3, 3], [0.26, 0]]) == pytest.approx(0.26)
    with pytest.raises(TooShort):
        loop_closure_error([[0, 0]])


@given(TRAJ, st.floats(-100, 100), st.floats(-100, 100))
def test_translation_invariance(traj, dx, dy):
    other = traj[::-1].copy()
    shift = np.array([dx, dy])
    assert rmse(traj + shift, other + shift) == pytest.approx(rmse(traj, other), rel=1e-9, abs=1e-9)
    if len(traj) >= 2:
        assert loop_closure_error(traj + shift) == pytest.approx(loop_closure_error(traj), rel=1e-9, abs=1e-9)


def test_published_memory_figures():
    assert conventional_costs(6400, 1215).backpointer_cells == 7_776_000
    assert adaptive_costs(100, 4, 1215).all_levels_memory_cells == 544_320
    assert adaptive_costs(225, 4, 596).all_levels_memory_cells == 565_008
    assert conventional_costs(14400, 596).backpointer_cells == 8_582_400
    assert adaptive_costs(100, 4, 1215).transitions == 100**2 * 1214 + 16 * 3 * 1214
    assert conventional_costs(6400, 1215).transitions == 6400**2 * 1214


def test_cost_report_dispatch_and_check():
    lad = build_ladder((0, 0), (8, 8), 0.1, 4)
    assert cost_report(lad, 1215).all_levels_memory_cells == 544_320
    assert cost_report(build_grid((0, 0), (8, 8), 0.1), 1215).backpointer_cells == 7_776_000
    good = Counters(transitions=100**2 * 9 + 16 * 3 * 9, observations=112 * 10, backpointer_cells=112 * 10)
    cost_report(lad, 10, good)
    with pytest.raises(ValueError):
        cost_report(lad, 10, Counters(1, 2, 3))


def test_resample_truth():
    tt = np.array([0.0, 1.0, 2.0])
    tp = np.array([[0.0, 0.0], [1.0, 2.0], [2.0, 2.0]])
    np.testing.assert_allclose(resample_truth(tt, tp, [0.5, 1.5]), [[0.5, 1.0], [1.5, 2.0]])
    np.testing.assert_allclose(resample_truth(tt, tp, [0.4, 1.6], "nearest"), [[0.0, 0.0], [2.0, 2.0]])


def test_evaluate_and_stopwatch():
    truth = np.array([[0.0, 0.0], [1.0, 0.0]])
    with stopwatch() as sw:
        rep = evaluate(truth + [0.3, 0.4], truth)
    assert sw.elapsed >= 0
    assert rep.rmse == pytest.approx(0.5) and rep.lce == pytest.approx(1.0)
    assert rep.errors == pytest.approx([0.5, 0.5])
