"""Accuracy metrics and compute/memory accounting."""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import LengthMismatch, TooShort
from .grid import GridSpec, ResolutionLadder

CANDIDATES_PER_STEP = 4


def _positions(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[1] != 2:
        raise ValueError(f"expected an (T, 2) array of positions, got shape {a.shape}")
    return a


def position_errors(estimate, truth) -> np.ndarray:
    est, ref = _positions(estimate), _positions(truth)
    if len(est) != len(ref):
        raise LengthMismatch(f"estimate has {len(est)} steps, truth has {len(ref)}")
    if len(est) == 0:
        raise LengthMismatch("empty trajectories")
    return np.hypot(*(est - ref).T)


def rmse(estimate, truth) -> float:
    """Root mean squared Euclidean position error."""
    e = position_errors(estimate, truth)
    return float(np.sqrt(np.mean(e**2)))


def loop_closure_error(estimate) -> float:
    """Distance between the first and last estimated positions."""
    est = _positions(estimate)
    if len(est) < 2:
        raise TooShort("loop closure needs at least two positions")
    return float(np.hypot(*(est[-1] - est[0])))


def resample_truth(truth_times, truth_positions, query_times, method: str = "linear") -> np.ndarray:
    """Truth positions at ``query_times`` by linear interpolation or nearest sample."""
    tt = np.asarray(truth_times, dtype=float)
    tp = _positions(truth_positions)
    q = np.asarray(query_times, dtype=float)
    if method == "linear":
        return np.column_stack((np.interp(q, tt, tp[:, 0]), np.interp(q, tt, tp[:, 1])))
    if method == "nearest":
        idx = np.clip(np.searchsorted(tt, q), 1, len(tt) - 1)
        left = tt[idx - 1]
        idx = np.where(q - left <= tt[idx] - q, idx - 1, idx)
        return tp[idx]
    raise ValueError(f"unknown resampling method {method!r}")


@dataclass
class CostReport:
    transitions: int
    observations: int
    backpointer_cells: int
    all_levels_memory_cells: int


def conventional_costs(N: int, T: int) -> CostReport:
    cells = N * T
    return CostReport(N * N * (T - 1), N * T, cells, cells)


def adaptive_costs(N1: int, r: int, T: int) -> CostReport:
    """Closed-form counts; the all-levels memory figure keeps all ``r`` per-level tables."""
    per_step = N1 + CANDIDATES_PER_STEP * (r - 1)
    return CostReport(
        transitions=N1 * N1 * (T - 1) + CANDIDATES_PER_STEP**2 * (r - 1) * (T - 1),
        observations=per_step * T,
        backpointer_cells=per_step * T,
        all_levels_memory_cells=per_step * T * r,
    )


def cost_report(space, T: int, counters=None) -> CostReport:
    """Expected costs for a full-grid (``GridSpec``) or adaptive (``ResolutionLadder``) decode.

    When ``counters`` from an actual decode are given they must agree with
    the closed form exactly.
    """
    if isinstance(space, ResolutionLadder):
        expected = adaptive_costs(space.coarsest.cell_count, space.r, T)
    elif isinstance(space, GridSpec):
        expected = conventional_costs(space.cell_count, T)
    else:
        raise TypeError("space must be a GridSpec or ResolutionLadder")
    if counters is not None:
        got = (counters.transitions, counters.observations, counters.backpointer_cells)
        want = (expected.transitions, expected.observations, expected.backpointer_cells)
        if got != want:
            raise ValueError(f"decode counters {got} disagree with closed form {want}")
    return expected


@dataclass
class EvalReport:
    rmse: float | None = None
    lce: float | None = None
    errors: list[float] = field(default_factory=list)
    transitions: int | None = None
    observations: int | None = None
    backpointer_cells: int | None = None
    wall_time_s: float | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate(estimate, truth=None) -> EvalReport:
    est = _positions(estimate)
    rep = EvalReport()
    if len(est) >= 2:
        rep.lce = loop_closure_error(est)
    if truth is not None:
        err = position_errors(est, truth)
        rep.errors = err.tolist()
        rep.rmse = float(np.sqrt(np.mean(err**2)))
    return rep


class Stopwatch:
    elapsed: float = 0.0


@contextmanager
def stopwatch():
    """Monotonic wall-clock timer: ``with stopwatch() as sw: ...; sw.elapsed``."""
    sw = Stopwatch()
    t0 = time.perf_counter()
    try:
        yield sw
    finally:
        sw.elapsed = time.perf_counter() - t0
