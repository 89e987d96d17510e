"""Per-anchor range conditioning: jump rejection then causal moving average."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .models import MeasurementFrame

DEFAULT_THRESHOLD_M = 1.0
DEFAULT_WINDOW = 10


@dataclass(frozen=True)
class RangeSeries:
    anchor_id: int
    times: np.ndarray
    ranges: np.ndarray
    valid: np.ndarray

    @classmethod
    def from_samples(cls, anchor_id, times, ranges, valid=None):
        times = np.asarray(times, dtype=float)
        ranges = np.asarray(ranges, dtype=float)
        if valid is None:
            valid = np.ones(len(ranges), dtype=bool)
        if times.shape != ranges.shape:
            raise ValueError("times and ranges differ in length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if np.any(ranges < 0):
            raise ValueError("ranges must be >= 0")
        return cls(int(anchor_id), times, ranges, np.asarray(valid, dtype=bool))

    def __len__(self):
        return len(self.times)

    def valid_samples(self):
        return self.times[self.valid], self.ranges[self.valid]


def reject_outliers(series: RangeSeries, threshold: float = DEFAULT_THRESHOLD_M) -> RangeSeries:
    """Invalidate samples that jump more than ``threshold`` from the last valid one.

    The first valid sample is always kept; samples already marked invalid
    are never used as a reference.
    """
    if not threshold > 0:
        raise ValueError("threshold must be > 0")
    valid = series.valid.copy()
    last = None
    for i, r in enumerate(series.ranges):
        if not valid[i]:
            continue
        if last is not None and abs(r - last) > threshold:
            valid[i] = False
            continue
        last = r
    return replace(series, valid=valid)


def smooth(series: RangeSeries, window: int = DEFAULT_WINDOW) -> RangeSeries:
    """Mean of the last ``window`` valid samples at or before each valid sample."""
    if int(window) != window or window < 1:
        raise ValueError("window must be a positive integer")
    out = series.ranges.copy()
    idx = np.flatnonzero(series.valid)
    vals = series.ranges[idx].tolist()
    for n, i in enumerate(idx):
        w = vals[max(0, n + 1 - window): n + 1]
        # clamp rounding so the mean never leaves the window's range
        out[i] = min(max(math.fsum(w) / len(w), min(w)), max(w))
    return replace(series, ranges=out)


def split_frames(frames: Sequence[MeasurementFrame]) -> dict[int, RangeSeries]:
    data: dict[int, tuple[list, list]] = {}
    for f in frames:
        for aid, r in f.ranges.items():
            ts, rs = data.setdefault(aid, ([], []))
            ts.append(f.t)
            rs.append(r)
    return {aid: RangeSeries.from_samples(aid, ts, rs) for aid, (ts, rs) in sorted(data.items())}


def merge_series(frames: Sequence[MeasurementFrame], series: dict[int, RangeSeries]) -> list[MeasurementFrame]:
    """Rebuild ``frames`` from per-anchor series keyed by frame index.

    Invalid samples vanish; a frame left without any range is dropped.
    """
    lookup: dict[int, dict[int, float]] = {}
    for aid, s in series.items():
        for t, r, ok in zip(s.times, s.ranges, s.valid):
            if ok:
                lookup.setdefault(int(t), {})[aid] = float(r)
    return [MeasurementFrame(t=f.t, ranges=lookup[f.t], time=f.time) for f in frames if f.t in lookup]


def preprocess_frames(frames: Sequence[MeasurementFrame], threshold: float = DEFAULT_THRESHOLD_M,
                      window: int = DEFAULT_WINDOW) -> list[MeasurementFrame]:
    """Outlier rejection and smoothing applied independently per anchor."""
    series = {
        aid: smooth(reject_outliers(s, threshold), window) for aid, s in split_frames(frames).items()
    }
    return merge_series(frames, series)
