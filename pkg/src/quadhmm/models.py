"""Log-domain transition and range-observation models.

Both models are unnormalized Gaussian kernels, so every log value is
``<= 0`` and equals 0 exactly at the kernel's mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyFrame, NotEnoughAnchors, UnknownAnchor
from .grid import GridSpec

MAX_USED_ANCHORS = 3


@dataclass(frozen=True)
class HmmParams:
    """Motion/measurement hyper-parameters.

    Attributes:
        sigma_x: motion model standard deviation (m).
        sigma_o: range standard deviation (m).
        T_s: sampling interval (s).
        v_c: assumed constant target speed (m/s).
    """

    sigma_x: float = 1.5
    sigma_o: float = 0.5
    T_s: float = 0.1
    v_c: float = 0.5

    def __post_init__(self):
        for name in ("sigma_x", "sigma_o", "T_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if not self.v_c >= 0:
            raise ValueError(f"v_c must be >= 0, got {self.v_c!r}")

    @property
    def step_length(self) -> float:
        """Expected displacement per sample, ``T_s * v_c``."""
        return self.T_s * self.v_c


@dataclass(frozen=True)
class Anchor:
    id: int
    position: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))


@dataclass(frozen=True)
class MeasurementFrame:
    """Ranges collected at one time index.

    ``t`` is the integer sample index and ``time`` the timestamp in seconds.
    """

    t: int
    ranges: Mapping[int, float] = field(default_factory=dict)
    time: float | None = None

    def __post_init__(self):
        ranges = {int(k): float(v) for k, v in dict(self.ranges).items()}
        for k, v in ranges.items():
            if not v >= 0:
                raise ValueError(f"negative range {v!r} for anchor {k} at t={self.t}")
        object.__setattr__(self, "ranges", dict(sorted(ranges.items())))

    @property
    def anchor_count(self) -> int:
        return len(self.ranges)

    def __hash__(self):
        return hash((self.t, tuple(self.ranges.items()), self.time))


def anchor_map(anchors: Sequence[Anchor]) -> dict[int, np.ndarray]:
    """``{id: position}``; dicts already in this form pass through."""
    if isinstance(anchors, dict):
        return anchors
    out = {}
    for a in anchors:
        if a.id in out:
            raise ValueError(f"duplicate anchor id {a.id}")
        out[a.id] = np.asarray(a.position, dtype=float)
    return out


# -- transition -------------------------------------------------------------


def transition_logprob_from_distance(distance, params: HmmParams):
    """``-(d - T_s v_c)^2 / (2 sigma_x^2)`` elementwise."""
    return -((np.asarray(distance, dtype=float) - params.step_length) ** 2) / (
        2.0 * params.sigma_x**2
    )


def transition_logprob(grid: GridSpec, from_cell, to_cell, params: HmmParams) -> float:
    """Log transition kernel between two cell centers (unnormalized, max 0)."""
    a = grid.cell_center(from_cell)
    b = grid.cell_center(to_cell)
    return float(transition_logprob_from_distance(np.hypot(*(b - a)), params))


def pairwise_transition(centers_from: np.ndarray, centers_to: np.ndarray, params: HmmParams) -> np.ndarray:
    """Matrix ``M[j, i]`` = log transition from ``centers_from[j]`` to ``centers_to[i]``."""
    d = np.hypot(
        centers_to[None, :, 0] - centers_from[:, None, 0],
        centers_to[None, :, 1] - centers_from[:, None, 1],
    )
    return transition_logprob_from_distance(d, params)


@lru_cache(maxsize=2)
def transition_matrix(grid: GridSpec, params: HmmParams) -> np.ndarray:
    """Dense ``(N, N)`` log transition table over a full grid, cached.

    The kernel is symmetric, so row ``i`` also holds every transition into
    cell ``i``.
    """
    c = grid.centers
    m = pairwise_transition(c, c, params)
    m.setflags(write=False)
    return m


# -- observation ------------------------------------------------------------


def _frame_terms(points: np.ndarray, frame: MeasurementFrame, anchors, params: HmmParams):
    """Per-anchor log terms, shape ``(len(points), K)``, columns in anchor-id order."""
    if not frame.ranges:
        raise EmptyFrame(f"frame t={frame.t} has no ranges")
    amap = anchor_map(anchors)
    ids = list(frame.ranges)
    cols = []
    for aid in ids:
        if aid not in amap:
            raise UnknownAnchor(f"range references undeclared anchor {aid}")
        pos = amap[aid]
        theta = np.hypot(points[:, 0] - pos[0], points[:, 1] - pos[1])
        cols.append(-((frame.ranges[aid] - theta) ** 2) / (2.0 * params.sigma_o**2))
    return ids, np.column_stack(cols)


def _sum_columns(terms: np.ndarray, cols) -> np.ndarray:
    # left-to-right accumulation so scalar oracles can reproduce it exactly
    acc = terms[:, cols[0]].copy()
    for c in cols[1:]:
        acc = acc + terms[:, c]
    return acc


def _best_subset(terms: np.ndarray):
    k = terms.shape[1]
    subsets = list(combinations(range(k), MAX_USED_ANCHORS))
    sums = np.column_stack([_sum_columns(terms, s) for s in subsets])
    # argmax returns the first maximum, i.e. the lexicographically smallest id set
    best = np.argmax(sums, axis=1)
    return subsets, best, sums[np.arange(len(best)), best]


def observation_logprobs(points, frame: MeasurementFrame, anchors, params: HmmParams,
                         best3: bool = True) -> np.ndarray:
    """Range log-likelihood at many positions.

    With more than three ranges in the frame only the best-scoring three are
    used, chosen separately for each position (unless ``best3`` is off).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    ids, terms = _frame_terms(points, frame, anchors, params)
    if len(ids) <= MAX_USED_ANCHORS or not best3:
        return _sum_columns(terms, list(range(len(ids))))
    return _best_subset(terms)[2]


def observation_logprob(grid: GridSpec, cell, frame: MeasurementFrame, anchors, params: HmmParams) -> float:
    return float(observation_logprobs(grid.cell_center(cell)[None, :], frame, anchors, params)[0])


def grid_observation_logprobs(grid: GridSpec, frame, anchors, params, cells=None) -> np.ndarray:
    """Observation log-likelihood of every cell (or of ``cells``) of ``grid``."""
    pts = grid.centers if cells is None else grid.centers[np.asarray(cells, dtype=np.intp)]
    return observation_logprobs(pts, frame, anchors, params)


def best_anchor_subset_at(point, frame: MeasurementFrame, anchors, params: HmmParams) -> frozenset[int]:
    if frame.anchor_count <= MAX_USED_ANCHORS:
        raise NotEnoughAnchors(
            f"subset selection needs more than {MAX_USED_ANCHORS} ranges, frame t={frame.t} has {frame.anchor_count}"
        )
    ids, terms = _frame_terms(np.atleast_2d(np.asarray(point, dtype=float)), frame, anchors, params)
    subsets, best, _ = _best_subset(terms)
    return frozenset(ids[c] for c in subsets[best[0]])


def best_anchor_subset(grid: GridSpec, cell, frame, anchors, params) -> frozenset[int]:
    """Anchor ids of the three ranges that maximize the likelihood at ``cell``."""
    return best_anchor_subset_at(grid.cell_center(cell), frame, anchors, params)
