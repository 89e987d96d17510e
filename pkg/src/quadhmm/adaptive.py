"""Coarse-to-fine (quadtree) Viterbi decoding.

Level 0 of the ladder is decoded over every cell. Each finer level ``k``
then decodes over just the four children of the level-``k-1`` MAP cell at
each time step, so one refinement step costs 16 transition and 4
observation evaluations regardless of grid size.

Ladder levels are 0-based here: level 0 is the coarsest grid.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import LadderMismatch, LevelOutOfRange
from .grid import GridSpec, ResolutionLadder, children_many
from .models import HmmParams, MeasurementFrame, anchor_map, observation_logprob, transition_logprob
from . import viterbi
from .viterbi import Counters, MapTrajectory, Trellis


@dataclass
class RefinementPass:
    level: int
    trellis: Trellis = field(repr=False)
    trajectory: MapTrajectory
    candidate_sets: np.ndarray | None = None  # (T, 4); None for the full coarse pass


@dataclass
class AdaptiveResult:
    passes: list[RefinementPass]
    counters: Counters
    wall_time_s: float = 0.0

    @property
    def final(self) -> MapTrajectory:
        return self.passes[-1].trajectory

    @property
    def r(self) -> int:
        return len(self.passes)

    @property
    def all_levels_memory_cells(self) -> int:
        """Backpointer cells counted once per per-level trajectory (``x r``)."""
        return self.counters.backpointer_cells * self.r


def refine_pass(ladder: ResolutionLadder, k: int, prev: MapTrajectory,
                frames: Sequence[MeasurementFrame], anchors, params: HmmParams) -> RefinementPass:
    """Decode level ``k`` restricted to the children of ``prev`` (a level ``k-1`` path)."""
    if not 1 <= k < ladder.r:
        raise LevelOutOfRange(f"refinement level {k} outside [1, {ladder.r})")
    if len(prev.cells) != len(frames):
        raise LadderMismatch(f"previous path has {len(prev.cells)} steps, got {len(frames)} frames")
    if prev.level is not None and prev.level != k - 1:
        raise LadderMismatch(f"previous path is at level {prev.level}, expected {k - 1}")
    amap = anchors if isinstance(anchors, dict) else anchor_map(anchors)
    grid = ladder[k]
    cands = children_many(ladder, k - 1, prev.cells)
    trellis = Trellis(grid)
    trellis.start(
        viterbi.grid_observation_logprobs(grid, frames[0], amap, params, cells=cands[0]),
        active=cands[0],
    )
    for t in range(1, len(frames)):
        viterbi.step_restricted(trellis, frames[t], amap, params, cands[t])
    return RefinementPass(
        level=k,
        trellis=trellis,
        trajectory=viterbi.backtrack(trellis, level=k),
        candidate_sets=cands,
    )


def decode_adaptive(ladder: ResolutionLadder, frames: Sequence[MeasurementFrame], anchors,
                    params: HmmParams) -> AdaptiveResult:
    """Full decode on the coarsest level, then one restricted pass per finer level."""
    if not frames:
        raise LadderMismatch("no frames to decode")
    amap = anchor_map(anchors)
    t0 = time.perf_counter()
    trellis = viterbi.decode_trellis(ladder[0], frames, amap, params)
    passes = [RefinementPass(level=0, trellis=trellis, trajectory=viterbi.backtrack(trellis, level=0))]
    counters = Counters()
    counters += trellis.counters
    for k in range(1, ladder.r):
        p = refine_pass(ladder, k, passes[-1].trajectory, frames, amap, params)
        counters += p.trellis.counters
        passes.append(p)
    return AdaptiveResult(passes=passes, counters=counters, wall_time_s=time.perf_counter() - t0)


class OnlineAdaptiveDecoder:
    """Frame-by-frame adaptive decoding.

    The coarse trellis grows by one column per frame; refinement passes are
    re-run over the whole prefix after every append.
    """

    def __init__(self, ladder: ResolutionLadder, anchors, params: HmmParams):
        self.ladder = ladder
        self.anchors = anchor_map(anchors)
        self.params = params
        self.frames: list[MeasurementFrame] = []
        self.coarse: Trellis | None = None
        self.result: AdaptiveResult | None = None

    def append(self, frame: MeasurementFrame) -> MapTrajectory:
        if self.coarse is None:
            self.coarse = viterbi.init_column(self.ladder[0], frame, self.anchors, self.params)
        else:
            viterbi.step(self.coarse, frame, self.anchors, self.params)
        self.frames.append(frame)
        passes = [RefinementPass(level=0, trellis=self.coarse,
                                 trajectory=viterbi.backtrack(self.coarse, level=0))]
        counters = Counters()
        counters += self.coarse.counters
        for k in range(1, self.ladder.r):
            p = refine_pass(self.ladder, k, passes[-1].trajectory, self.frames, self.anchors, self.params)
            counters += p.trellis.counters
            passes.append(p)
        self.result = AdaptiveResult(passes=passes, counters=counters)
        return self.result.final


def sequence_score(grid: GridSpec, cells, frames: Sequence[MeasurementFrame], anchors,
                   params: HmmParams) -> float:
    """Log score of a cell sequence under ``grid``'s models.

    Accumulates in trellis order, ``score = obs_t + (score + trans)``.
    """
    amap = anchors if isinstance(anchors, dict) else anchor_map(anchors)
    cells = [int(c) for c in cells]
    score = observation_logprob(grid, cells[0], frames[0], amap, params)
    for t in range(1, len(cells)):
        score = observation_logprob(grid, cells[t], frames[t], amap, params) + (
            score + transition_logprob(grid, cells[t - 1], cells[t], params)
        )
    return score


@dataclass
class DivergenceReport:
    mean_divergence_m: float
    conventional: MapTrajectory
    adaptive: AdaptiveResult
    conventional_counters: Counters
    adaptive_counters: Counters
    conventional_wall_time_s: float
    adaptive_wall_time_s: float


def compare_decodes(grid_fine: GridSpec, ladder: ResolutionLadder, frames, anchors,
                    params: HmmParams) -> DivergenceReport:
    """Run both decoders and report the mean distance between their paths."""
    if grid_fine != ladder.finest:
        raise LadderMismatch("fine grid differs from the ladder's finest level")
    t0 = time.perf_counter()
    conv = viterbi.decode(grid_fine, frames, anchors, params)
    conv_time = time.perf_counter() - t0
    res = decode_adaptive(ladder, frames, anchors, params)
    div = float(np.mean(np.linalg.norm(conv.positions - res.final.positions, axis=1)))
    return DivergenceReport(
        mean_divergence_m=div,
        conventional=conv,
        adaptive=res,
        conventional_counters=conv.counters,
        adaptive_counters=res.counters,
        conventional_wall_time_s=conv_time,
        adaptive_wall_time_s=res.wall_time_s,
    )
