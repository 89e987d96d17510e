"""CSV/JSON file formats for scenarios, trajectories and reports.

Floats are written with ``repr`` (shortest round-trip form), so a written
scenario parses back bit-for-bit.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import QuadHmmError
from .models import Anchor, MeasurementFrame
from .sim import EventWindow, Scenario, Track

ANCHORS_HEADER = ["id", "x", "y"]
RANGES_HEADER = ["t", "anchor_id", "range"]
TRUTH_HEADER = ["t", "x", "y"]
TRAJECTORY_HEADER = ["t", "x", "y", "cell_index", "level"]
REPORT_KEYS = ["rmse_m", "lce_m", "transitions", "observations", "backpointer_cells",
               "wall_time_s", "estimator", "params"]
TIME_TOL_S = 1e-6


class ParseError(QuadHmmError, ValueError):
    def __init__(self, path, line, message):
        self.path, self.line = str(path), line
        super().__init__(f"{path}:{line}: {message}")


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path, header, rows: Iterable[Sequence]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])


def _read_csv(path, header):
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            got = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "empty file") from None
        if [h.strip() for h in got] != header:
            raise ParseError(path, 1, f"expected header {','.join(header)}, got {','.join(got)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(path, lineno, f"expected {len(header)} fields, got {len(row)}")
            yield lineno, [c.strip() for c in row]


def _num(path, lineno, text, kind=float):
    try:
        v = kind(text)
    except ValueError:
        raise ParseError(path, lineno, f"not a number: {text!r}") from None
    if kind is float and not math.isfinite(v):
        raise ParseError(path, lineno, f"non-finite value {text!r}")
    return v


# -- anchors / ranges / truth ----------------------------------------------------


def write_anchors(path, anchors: Sequence[Anchor]):
    _write_csv(path, ANCHORS_HEADER, ((a.id, a.position[0], a.position[1]) for a in anchors))


def read_anchors(path) -> list[Anchor]:
    out, seen = [], set()
    for lineno, (i, x, y) in _read_csv(path, ANCHORS_HEADER):
        aid = _num(path, lineno, i, int)
        if aid in seen:
            raise ParseError(path, lineno, f"duplicate anchor id {aid}")
        seen.add(aid)
        out.append(Anchor(aid, (_num(path, lineno, x), _num(path, lineno, y))))
    return out


def write_ranges(path, frames: Sequence[MeasurementFrame], T_s: float = 0.1):
    rows = []
    for f in frames:
        t = f.time if f.time is not None else f.t * T_s
        rows.extend((t, aid, r) for aid, r in f.ranges.items())
    _write_csv(path, RANGES_HEADER, rows)


def read_ranges(path, T_s: float = 0.1, known_anchors=None) -> list[MeasurementFrame]:
    """Group range rows into frames by timestamp (tolerance 1 us).

    The frame index is the timestamp divided by ``T_s``, rounded.
    """
    groups: list[tuple[float, dict, int]] = []
    for lineno, (t, aid, r) in _read_csv(path, RANGES_HEADER):
        t = _num(path, lineno, t)
        aid = _num(path, lineno, aid, int)
        r = _num(path, lineno, r)
        if r < 0:
            raise ParseError(path, lineno, f"negative range {r!r}")
        if known_anchors is not None and aid not in known_anchors:
            raise ParseError(path, lineno, f"unknown anchor id {aid}")
        if groups and abs(t - groups[-1][0]) <= TIME_TOL_S:
            if aid in groups[-1][1]:
                raise ParseError(path, lineno, f"second range for anchor {aid} at t={t!r}")
            groups[-1][1][aid] = r
            continue
        if groups and t < groups[-1][0]:
            raise ParseError(path, lineno, "timestamps must be non-decreasing")
        groups.append((t, {aid: r}, lineno))
    frames = []
    for t, ranges, lineno in groups:
        idx = int(round(t / T_s))
        if frames and idx <= frames[-1].t:
            raise ParseError(path, lineno, f"two frames map to sample index {idx}")
        frames.append(MeasurementFrame(t=idx, ranges=ranges, time=t))
    return frames


def write_truth(path, track: Track):
    _write_csv(path, TRUTH_HEADER, ((t, p[0], p[1]) for t, p in zip(track.times, track.positions)))


def read_truth(path) -> Track:
    times, pos = [], []
    for lineno, (t, x, y) in _read_csv(path, TRUTH_HEADER):
        times.append(_num(path, lineno, t))
        pos.append((_num(path, lineno, x), _num(path, lineno, y)))
    return Track(times=np.array(times, dtype=float), positions=np.array(pos, dtype=float).reshape(-1, 2))


# -- scenario directory ---------------------------------------------------------------

SCENARIO_META = "scenario.json"


def write_scenario(out_dir, scenario: Scenario):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_anchors(out / "anchors.csv", scenario.anchors)
    write_ranges(out / "ranges.csv", scenario.frames, scenario.T_s)
    write_truth(out / "truth.csv", scenario.truth)
    meta = {
        "origin": list(scenario.origin),
        "extent": list(scenario.extent),
        "T_s": scenario.T_s,
        "events": [
            {"anchor_id": e.anchor_id, "start": e.start, "end": e.end, "kind": e.kind, "delta": e.delta}
            for e in scenario.events
        ],
    }
    write_json(out / SCENARIO_META, meta)


def read_scenario(in_dir, T_s: float | None = None, origin=None, extent=None) -> Scenario:
    """Load a scenario directory; ``scenario.json`` and ``truth.csv`` are optional."""
    d = Path(in_dir)
    meta = {}
    if (d / SCENARIO_META).exists():
        meta = json.loads((d / SCENARIO_META).read_text())
    T_s = float(meta.get("T_s", T_s if T_s is not None else 0.1))
    anchors = read_anchors(d / "anchors.csv")
    frames = read_ranges(d / "ranges.csv", T_s, {a.id for a in anchors})
    truth = read_truth(d / "truth.csv") if (d / "truth.csv").exists() else Track(np.zeros(0), np.zeros((0, 2)))
    events = [EventWindow(int(e["anchor_id"]), float(e["start"]), float(e["end"]), e.get("kind", "dropout"),
                          float(e.get("delta", 0.0))) for e in meta.get("events", [])]
    origin = meta.get("origin", origin if origin is not None else (0.0, 0.0))
    extent = meta.get("extent", extent)
    return Scenario(
        origin=(float(origin[0]), float(origin[1])),
        extent=None if extent is None else (float(extent[0]), float(extent[1])),
        anchors=anchors,
        truth=truth,
        frames=frames,
        events=events,
        T_s=T_s,
    )


# -- outputs --------------------------------------------------------------------------------


def write_trajectory(path, times, positions, cells=None, level=None):
    rows = []
    for n, (t, p) in enumerate(zip(times, positions)):
        cell = "" if cells is None else int(cells[n])
        rows.append((t, p[0], p[1], cell, "" if level is None else int(level)))
    _write_csv(path, TRAJECTORY_HEADER, rows)


def read_trajectory(path):
    """Return ``(times, positions)`` from a trajectory or truth CSV."""
    path = Path(path)
    with open(path, newline="") as fh:
        first = fh.readline().strip().split(",")
    header = TRAJECTORY_HEADER if first == TRAJECTORY_HEADER else TRUTH_HEADER
    times, pos = [], []
    for lineno, row in _read_csv(path, header):
        times.append(_num(path, lineno, row[0]))
        pos.append((_num(path, lineno, row[1]), _num(path, lineno, row[2])))
    return np.array(times, dtype=float), np.array(pos, dtype=float).reshape(-1, 2)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def write_json(path, data):
    Path(path).write_text(json.dumps(_jsonable(data), indent=2, sort_keys=False) + "\n")
