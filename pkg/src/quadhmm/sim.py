"""Synthetic ranging scenarios: anchors, walking paths, noisy ranges, dropouts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ZeroLengthPath
from .models import Anchor, MeasurementFrame, anchor_map

DEFAULT_BIAS_M = 1.0
_TIME_TOL = 1e-9


@dataclass(frozen=True)
class EventWindow:
    """Interval ``[start, end]`` (s) during which one anchor is dropped or biased."""

    anchor_id: int
    start: float
    end: float
    kind: str = "dropout"
    delta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("dropout", "bias"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if not self.start < self.end:
            raise ValueError(f"event window needs start < end, got [{self.start}, {self.end}]")

    @classmethod
    def bias(cls, anchor_id, start, end, delta=DEFAULT_BIAS_M):
        return cls(anchor_id, start, end, "bias", delta)

    def covers(self, t: float) -> bool:
        return self.start - _TIME_TOL <= t <= self.end + _TIME_TOL


@dataclass
class Track:
    """Ground-truth positions sampled every ``T_s`` seconds from ``times[0]``."""

    times: np.ndarray
    positions: np.ndarray

    def __len__(self):
        return len(self.times)


@dataclass
class Scenario:
    origin: tuple[float, float]
    extent: tuple[float, float]
    anchors: list[Anchor]
    truth: Track
    frames: list[MeasurementFrame]
    events: list[EventWindow] = field(default_factory=list)
    T_s: float = 0.1

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            tuple(self.origin) == tuple(other.origin)
            and tuple(self.extent) == tuple(other.extent)
            and self.anchors == other.anchors
            and np.array_equal(self.truth.times, other.truth.times)
            and np.array_equal(self.truth.positions, other.truth.positions)
            and self.frames == other.frames
            and self.events == other.events
            and self.T_s == other.T_s
        )


def gen_trajectory(waypoints, speed: float, T_s: float) -> Track:
    """Constant-speed piecewise-linear path through ``waypoints``.

    Samples are spaced ``speed * T_s`` apart in arc length; the final
    waypoint is always the last sample.
    """
    wp = np.asarray(waypoints, dtype=float)
    if wp.ndim != 2 or wp.shape[0] < 2:
        raise ValueError("need at least two waypoints")
    if not speed > 0 or not T_s > 0:
        raise ValueError("speed and T_s must be positive")
    seg = np.hypot(*np.diff(wp, axis=0).T)
    cum = np.concatenate(([0.0], np.cumsum(seg)))
    length = cum[-1]
    if length <= 0:
        raise ZeroLengthPath("waypoints do not span any distance")
    ds = speed * T_s
    n = length / ds
    k = round(n)
    if abs(n - k) > 1e-9 * max(1.0, n):
        k = int(np.floor(n))
    s = np.arange(k + 1) * ds
    s[-1] = min(s[-1], length)
    if length - s[-1] > 1e-9 * max(1.0, length):
        s = np.append(s, length)
    else:
        s[-1] = length
    pos = np.column_stack((np.interp(s, cum, wp[:, 0]), np.interp(s, cum, wp[:, 1])))
    # exact endpoints regardless of interpolation rounding
    pos[0] = wp[0]
    pos[-1] = wp[-1]
    return Track(times=np.arange(len(s)) * T_s, positions=pos)


def simulate_ranges(truth: Track, anchors: Sequence[Anchor], sigma_o: float,
                    events: Sequence[EventWindow] = (), seed: int = 0) -> list[MeasurementFrame]:
    """Noisy anchor ranges for every truth sample.

    Noise is drawn for every (sample, anchor) pair, including dropped ones,
    so adding a dropout window leaves the other ranges unchanged. A sample
    time at which every anchor is dropped yields no frame.
    """
    if sigma_o < 0:
        raise ValueError("sigma_o must be >= 0")
    rng = np.random.default_rng(seed)
    amap = anchor_map(anchors)
    ids = sorted(amap)
    pos = np.asarray(truth.positions, dtype=float)
    noise = rng.standard_normal((len(pos), len(ids))) * sigma_o
    frames = []
    for t, (time, p) in enumerate(zip(truth.times, pos)):
        time = float(time)
        ranges = {}
        for k, aid in enumerate(ids):
            hits = [e for e in events if e.anchor_id == aid and e.covers(time)]
            if any(e.kind == "dropout" for e in hits):
                continue
            d = float(np.hypot(*(p - amap[aid])))
            d += sum(e.delta for e in hits if e.kind == "bias")
            ranges[aid] = max(d + float(noise[t, k]), 0.0)
        if ranges:
            frames.append(MeasurementFrame(t=t, ranges=ranges, time=time))
    return frames


def random_waypoints(rng: np.random.Generator, lo, hi, min_length: float, start=None) -> np.ndarray:
    """Uniform random waypoints in the box ``[lo, hi]`` until the path is long enough."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if not np.all(hi > lo):
        raise ValueError(f"empty waypoint box [{lo.tolist()}, {hi.tolist()}]")
    pts = [np.asarray(start, dtype=float) if start is not None else rng.uniform(lo, hi)]
    length = 0.0
    while length < min_length:
        nxt = rng.uniform(lo, hi)
        length += float(np.hypot(*(nxt - pts[-1])))
        pts.append(nxt)
    return np.array(pts)


def walking_scenario(seed: int, steps: int, extent=(8.0, 8.0), anchors=None, sigma_o: float = 0.5,
                     speed: float = 0.5, T_s: float = 0.1, events: Sequence[EventWindow] = (),
                     margin: float = 1.0, waypoints=None, origin=(0.0, 0.0)) -> Scenario:
    """Seeded random walk of exactly ``steps`` samples inside the workspace.

    Defaults mirror an 8 m x 8 m room with anchors in three of its corners.
    """
    rng = np.random.default_rng(seed)
    w, h = extent
    x0, y0 = float(origin[0]), float(origin[1])
    if anchors is None:
        anchors = [Anchor(1, (x0, y0)), Anchor(2, (x0 + w, y0)), Anchor(3, (x0, y0 + h))]
    if waypoints is None:
        need = steps * speed * T_s + speed * T_s
        waypoints = random_waypoints(rng, (x0 + margin, y0 + margin), (x0 + w - margin, y0 + h - margin), need)
    track = gen_trajectory(waypoints, speed, T_s)
    if len(track) < steps:
        raise ValueError(f"waypoints give {len(track)} samples, {steps} requested")
    track = Track(times=track.times[:steps], positions=track.positions[:steps])
    frames = simulate_ranges(track, anchors, sigma_o, events, seed=int(rng.integers(2**32)))
    return Scenario(origin=(x0, y0), extent=(float(w), float(h)), anchors=list(anchors),
                    truth=track, frames=frames, events=list(events), T_s=T_s)
