"""Log-domain Viterbi decoding of the MAP cell sequence.

The trellis can span the whole grid or, per column, a restricted set of
active cells (used by the coarse-to-fine decoder). Every argmax breaks ties
toward the smallest cell index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyFrame, EmptyTrellis
from .grid import GridSpec
from .models import (
    HmmParams,
    MeasurementFrame,
    anchor_map,
    grid_observation_logprobs,
    pairwise_transition,
    transition_matrix,
)

_CHUNK = 128


@dataclass
class Counters:
    transitions: int = 0
    observations: int = 0
    backpointer_cells: int = 0

    def __iadd__(self, other: "Counters"):
        self.transitions += other.transitions
        self.observations += other.observations
        self.backpointer_cells += other.backpointer_cells
        return self

    def as_dict(self) -> dict:
        return {
            "transitions": self.transitions,
            "observations": self.observations,
            "backpointer_cells": self.backpointer_cells,
        }


def max_plus(prev: np.ndarray, trans_in: np.ndarray, chunk: int = _CHUNK):
    """``best[i] = max_j prev[j] + trans_in[i, j]`` and its first argmax.

    ``trans_in`` is destination-major: row ``i`` holds the log probability of
    reaching ``i`` from every predecessor ``j``.
    """
    n_cur, n_prev = trans_in.shape
    best = np.empty(n_cur)
    arg = np.empty(n_cur, dtype=np.intp)
    buf = np.empty((min(chunk, n_cur), n_prev))
    for s in range(0, n_cur, chunk):
        e = min(s + chunk, n_cur)
        m = buf[: e - s]
        np.add(trans_in[s:e], prev, out=m)
        k = m.argmax(axis=1)
        arg[s:e] = k
        best[s:e] = m[np.arange(e - s), k]
    return best, arg


class Trellis:
    """Log-belief columns ``rho_t`` and backpointer columns ``Psi_t``.

    ``backptrs[t - 1]`` holds, for each active cell of column ``t``, the cell
    index of its best predecessor in column ``t - 1``. With
    ``low_memory=True`` only the latest belief column is retained.
    """

    def __init__(self, grid: GridSpec | None = None, low_memory: bool = False):
        self.grid = grid
        self.low_memory = low_memory
        self.columns: list[np.ndarray] = []
        self.backptrs: list[np.ndarray] = []
        self.active: list[np.ndarray | None] = []
        self.counters = Counters()
        self._last: np.ndarray | None = None
        self._length = 0

    def __len__(self) -> int:
        return self._length

    @property
    def last_column(self) -> np.ndarray:
        if self._last is None:
            raise EmptyTrellis("trellis has no columns")
        return self._last

    def active_cells(self, t: int) -> np.ndarray:
        a = self.active[t]
        if a is None:
            return np.arange(self.last_column.size)
        return a

    def _push(self, rho: np.ndarray, active):
        rho.setflags(write=False)
        if self.low_memory:
            self.columns = [rho]
        else:
            self.columns.append(rho)
        self.active.append(None if active is None else np.asarray(active, dtype=np.intp))
        self._last = rho
        self._length += 1
        self.counters.observations += rho.size
        self.counters.backpointer_cells += rho.size

    def start(self, log_obs, active=None) -> "Trellis":
        """First column from likelihood alone (no prior)."""
        if self._length:
            raise ValueError("trellis already started")
        self._push(np.array(log_obs, dtype=float), active)
        return self

    def extend(self, log_obs, trans_in, active=None) -> "Trellis":
        """Append one column.

        ``trans_in[i, j]`` is the log transition from the ``j``-th active cell
        of the previous column to the ``i``-th active cell of the new one.
        """
        prev = self.last_column
        trans_in = np.asarray(trans_in, dtype=float)
        log_obs = np.asarray(log_obs, dtype=float)
        if trans_in.shape != (log_obs.size, prev.size):
            raise ValueError(
                f"transition block {trans_in.shape} does not match ({log_obs.size}, {prev.size})"
            )
        best, arg = max_plus(prev, trans_in)
        prev_active = self.active[-1]
        ptr = arg if prev_active is None else prev_active[arg]
        ptr.setflags(write=False)
        self.backptrs.append(ptr)
        self.counters.transitions += trans_in.size
        self._push(log_obs + best, active)
        return self

    def backtrack_cells(self) -> np.ndarray:
        """Cell indices of the MAP sequence, one per column."""
        if not self._length:
            raise EmptyTrellis("cannot backtrack an empty trellis")
        T = self._length
        cells = np.empty(T, dtype=np.intp)
        last = self._last
        k = int(np.argmax(last))
        a = self.active[-1]
        cells[-1] = k if a is None else a[k]
        for t in range(T - 1, 0, -1):
            a = self.active[t]
            pos = cells[t] if a is None else int(np.flatnonzero(a == cells[t])[0])
            cells[t - 1] = self.backptrs[t - 1][pos]
        return cells

    @property
    def final_score(self) -> float:
        return float(np.max(self.last_column))


@dataclass
class MapTrajectory:
    cells: np.ndarray
    positions: np.ndarray
    score: float
    level: int | None = None
    grid: GridSpec | None = field(default=None, repr=False)
    counters: Counters | None = None

    def __len__(self) -> int:
        return len(self.cells)


# -- grid API ----------------------------------------------------------------


def _check_frame(frame: MeasurementFrame):
    if not frame.ranges:
        raise EmptyFrame(f"frame t={frame.t} has no ranges")


def init_column(grid: GridSpec, frame: MeasurementFrame, anchors, params: HmmParams,
                low_memory: bool = False) -> Trellis:
    _check_frame(frame)
    trellis = Trellis(grid, low_memory=low_memory)
    return trellis.start(grid_observation_logprobs(grid, frame, anchors, params))


def step(trellis: Trellis, frame: MeasurementFrame, anchors, params: HmmParams) -> Trellis:
    """Append one frame over the full grid (``N**2`` transition evaluations)."""
    _check_frame(frame)
    grid = trellis.grid
    log_obs = grid_observation_logprobs(grid, frame, anchors, params)
    # the kernel is symmetric, so the source-major table is also destination-major
    return trellis.extend(log_obs, transition_matrix(grid, params))


def step_restricted(trellis: Trellis, frame: MeasurementFrame, anchors, params: HmmParams,
                    active: np.ndarray) -> Trellis:
    """Append one frame whose live cells are ``active`` (sorted cell indices)."""
    _check_frame(frame)
    grid = trellis.grid
    active = np.asarray(active, dtype=np.intp)
    log_obs = grid_observation_logprobs(grid, frame, anchors, params, cells=active)
    prev = trellis.active_cells(len(trellis) - 1)
    trans_in = pairwise_transition(grid.centers[active], grid.centers[prev], params)
    return trellis.extend(log_obs, trans_in, active=active)


def backtrack(trellis: Trellis, level: int | None = None) -> MapTrajectory:
    cells = trellis.backtrack_cells()
    grid = trellis.grid
    positions = grid.centers[cells] if grid is not None else np.empty((len(cells), 0))
    return MapTrajectory(cells=cells, positions=positions, score=trellis.final_score,
                         level=level, grid=grid, counters=trellis.counters)


def decode_trellis(grid: GridSpec, frames: Sequence[MeasurementFrame], anchors, params: HmmParams,
                   low_memory: bool = False) -> Trellis:
    if not frames:
        raise EmptyTrellis("no frames to decode")
    amap = anchor_map(anchors)
    trellis = init_column(grid, frames[0], amap, params, low_memory=low_memory)
    for frame in frames[1:]:
        step(trellis, frame, amap, params)
    return trellis


def decode(grid: GridSpec, frames: Sequence[MeasurementFrame], anchors, params: HmmParams,
           low_memory: bool = False) -> MapTrajectory:
    """Conventional full-grid MAP decode."""
    trellis = decode_trellis(grid, frames, anchors, params, low_memory=low_memory)
    return backtrack(trellis)


# -- generic tables -------------------------------------------------------------


def decode_tables(log_obs, log_trans):
    """Viterbi over explicit tables.

    Args:
        log_obs: ``(T, N)`` per-step log emission values.
        log_trans: ``(N, N)`` with ``log_trans[j, i]`` the log transition j -> i.

    Returns:
        ``(cells, score, trellis)``.
    """
    log_obs = np.asarray(log_obs, dtype=float)
    trans_in = np.ascontiguousarray(np.asarray(log_trans, dtype=float).T)
    trellis = Trellis().start(log_obs[0])
    for row in log_obs[1:]:
        trellis.extend(row, trans_in)
    return trellis.backtrack_cells(), trellis.final_score, trellis
