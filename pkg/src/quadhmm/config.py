"""Run configuration loaded from JSON, validated with field-path error messages."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .errors import InvalidLevels, NonTiling
from .grid import GridSpec, ResolutionLadder, build_ladder
from .models import Anchor, HmmParams
from .sim import EventWindow

ESTIMATORS = ("viterbi", "adaptive", "trilateration", "ekf", "erts", "pf")


@dataclass
class PreprocessConfig:
    enabled: bool = True
    threshold: float = 1.0
    window: int = 10


@dataclass
class SimulationConfig:
    anchors: list[Anchor] | None = None  # None: three workspace corners
    steps: int = 600
    speed: float = 0.5
    sigma_o: float | None = None  # generation noise; defaults to params.sigma_o
    waypoints: list | None = None
    margin: float = 1.0


@dataclass
class BaselineConfig:
    bias_fraction: tuple[float, float] = (0.1, 0.1)
    position_std: float = 0.5
    velocity_std: float = 0.5
    particle_count: int | None = None  # defaults to the coarsest-level cell count


@dataclass
class BenchRow:
    extent: tuple[float, float]
    resolution: float
    levels: int
    T: int


@dataclass
class BenchConfig:
    rows: list[BenchRow] = field(default_factory=lambda: [BenchRow((8.0, 8.0), 0.1, 4, 50)])
    estimators: tuple[str, ...] = ("viterbi", "adaptive")
    repeats: int = 1
    counts_only: bool = False  # closed-form counts, no decoding


@dataclass
class RunConfig:
    origin: tuple[float, float] = (0.0, 0.0)
    extent: tuple[float, float] = (8.0, 8.0)
    resolution: float = 0.1
    levels: int = 4
    params: HmmParams = field(default_factory=HmmParams)
    estimator: str = "adaptive"
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    seed: int = 0
    events: list[EventWindow] = field(default_factory=list)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    baselines: BaselineConfig = field(default_factory=BaselineConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)

    def ladder(self) -> ResolutionLadder:
        try:
            return build_ladder(self.origin, self.extent, self.resolution, self.levels)
        except NonTiling as e:
            raise ConfigError("workspace.extent", str(e)) from None
        except InvalidLevels as e:
            raise ConfigError("grid.levels", str(e)) from None

    def grid(self) -> GridSpec:
        return self.ladder().finest

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ConfigError("<file>", f"invalid JSON at line {e.lineno}: {e.msg}") from None
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        _keys(data, "", {"workspace", "grid", "params", "estimator", "preprocess", "seed", "events",
                         "simulation", "baselines", "bench"})
        cfg = cls()
        ws = _section(data, "workspace", {"origin", "extent"})
        if "origin" in ws:
            cfg.origin = _pair(ws["origin"], "workspace.origin")
        if "extent" in ws:
            cfg.extent = _pair(ws["extent"], "workspace.extent", positive=True)
        g = _section(data, "grid", {"resolution", "levels"})
        if "resolution" in g:
            cfg.resolution = _positive(g["resolution"], "grid.resolution")
        if "levels" in g:
            cfg.levels = _int(g["levels"], "grid.levels", minimum=1)
        p = _section(data, "params", {"sigma_x", "sigma_o", "T_s", "v_c"})
        values = {}
        for name in ("sigma_x", "sigma_o", "T_s"):
            if name in p:
                values[name] = _positive(p[name], f"params.{name}")
        if "v_c" in p:
            values["v_c"] = _number(p["v_c"], "params.v_c", minimum=0.0)
        cfg.params = HmmParams(**values)
        if "estimator" in data:
            if data["estimator"] not in ESTIMATORS:
                raise ConfigError("estimator", f"must be one of {', '.join(ESTIMATORS)}")
            cfg.estimator = data["estimator"]
        pre = _section(data, "preprocess", {"enabled", "threshold", "window"})
        if "enabled" in pre:
            if not isinstance(pre["enabled"], bool):
                raise ConfigError("preprocess.enabled", "must be true or false")
            cfg.preprocess.enabled = pre["enabled"]
        if "threshold" in pre:
            cfg.preprocess.threshold = _positive(pre["threshold"], "preprocess.threshold")
        if "window" in pre:
            cfg.preprocess.window = _int(pre["window"], "preprocess.window", minimum=1)
        if "seed" in data:
            cfg.seed = _int(data["seed"], "seed", minimum=0)
        if "events" in data:
            cfg.events = _events(data["events"])
        sim = _section(data, "simulation", {"anchors", "steps", "speed", "sigma_o", "waypoints", "margin"})
        if "anchors" in sim:
            cfg.simulation.anchors = _anchors(sim["anchors"])
        if "steps" in sim:
            cfg.simulation.steps = _int(sim["steps"], "simulation.steps", minimum=1)
        if "speed" in sim:
            cfg.simulation.speed = _positive(sim["speed"], "simulation.speed")
        if "sigma_o" in sim:
            cfg.simulation.sigma_o = _number(sim["sigma_o"], "simulation.sigma_o", minimum=0.0)
        if "margin" in sim:
            cfg.simulation.margin = _number(sim["margin"], "simulation.margin", minimum=0.0)
        if "waypoints" in sim:
            wps = sim["waypoints"]
            if not isinstance(wps, list) or len(wps) < 2:
                raise ConfigError("simulation.waypoints", "need a list of at least two [x, y] points")
            cfg.simulation.waypoints = [_pair(w, f"simulation.waypoints[{i}]") for i, w in enumerate(wps)]
        b = _section(data, "baselines", {"bias_fraction", "position_std", "velocity_std", "particle_count"})
        if "bias_fraction" in b:
            cfg.baselines.bias_fraction = _pair(b["bias_fraction"], "baselines.bias_fraction")
        if "position_std" in b:
            cfg.baselines.position_std = _positive(b["position_std"], "baselines.position_std")
        if "velocity_std" in b:
            cfg.baselines.velocity_std = _positive(b["velocity_std"], "baselines.velocity_std")
        if "particle_count" in b:
            cfg.baselines.particle_count = _int(b["particle_count"], "baselines.particle_count", minimum=1)
        if "bench" in data:
            cfg.bench = _bench(data["bench"])
        cfg.validate()
        return cfg

    def validate(self) -> "RunConfig":
        """Cross-field checks; call again after overriding fields."""
        if self.estimator not in ESTIMATORS:
            raise ConfigError("estimator", f"must be one of {', '.join(ESTIMATORS)}")
        self.ladder()  # tiling check
        if self.estimator == "viterbi" and self.levels != 1:
            raise ConfigError("grid.levels", "the viterbi estimator decodes a single grid; set levels to 1")
        return self

    def flat_params(self) -> dict:
        """Flat key/value view used in reports."""
        return {
            "sigma_x": self.params.sigma_x,
            "sigma_o": self.params.sigma_o,
            "T_s": self.params.T_s,
            "v_c": self.params.v_c,
            "resolution": self.resolution,
            "levels": self.levels,
            "origin_x": self.origin[0],
            "origin_y": self.origin[1],
            "extent_x": self.extent[0],
            "extent_y": self.extent[1],
            "preprocess_enabled": self.preprocess.enabled,
            "preprocess_threshold": self.preprocess.threshold,
            "preprocess_window": self.preprocess.window,
            "seed": self.seed,
        }


def _keys(d, prefix, allowed):
    if not isinstance(d, dict):
        raise ConfigError(prefix or "<root>", "must be a JSON object")
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{prefix}{k}", "unknown field")


def _section(data, name, allowed) -> dict:
    sec = data.get(name, {})
    _keys(sec, f"{name}.", allowed)
    if not isinstance(sec, dict):
        raise ConfigError(name, "must be a JSON object")
    return sec


def _number(v, path, minimum=None) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"must be a number, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {v!r}")
    return float(v)


def _positive(v, path) -> float:
    v = _number(v, path)
    if not v > 0:
        raise ConfigError(path, f"must be > 0, got {v!r}")
    return v


def _int(v, path, minimum=None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, f"must be an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {v!r}")
    return v


def _pair(v, path, positive=False) -> tuple[float, float]:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ConfigError(path, "must be a two-element list")
    conv = _positive if positive else _number
    return conv(v[0], f"{path}[0]"), conv(v[1], f"{path}[1]")


def _anchors(items) -> list[Anchor]:
    if not isinstance(items, list) or not items:
        raise ConfigError("simulation.anchors", "must be a non-empty list")
    out, seen = [], set()
    for i, a in enumerate(items):
        path = f"simulation.anchors[{i}]"
        _keys(a, f"{path}.", {"id", "x", "y"})
        aid = _int(a.get("id"), f"{path}.id")
        if aid in seen:
            raise ConfigError(f"{path}.id", f"duplicate anchor id {aid}")
        seen.add(aid)
        out.append(Anchor(aid, (_number(a.get("x"), f"{path}.x"), _number(a.get("y"), f"{path}.y"))))
    return out


def _events(items) -> list[EventWindow]:
    if not isinstance(items, list):
        raise ConfigError("events", "must be a list")
    out = []
    for i, e in enumerate(items):
        path = f"events[{i}]"
        _keys(e, f"{path}.", {"anchor_id", "start", "end", "kind", "delta"})
        kind = e.get("kind", "dropout")
        if kind not in ("dropout", "bias"):
            raise ConfigError(f"{path}.kind", "must be 'dropout' or 'bias'")
        start = _number(e.get("start"), f"{path}.start")
        end = _number(e.get("end"), f"{path}.end")
        if not start < end:
            raise ConfigError(f"{path}.end", "must be greater than start")
        delta = _number(e.get("delta", 1.0 if kind == "bias" else 0.0), f"{path}.delta")
        out.append(EventWindow(_int(e.get("anchor_id"), f"{path}.anchor_id"), start, end, kind, delta))
    return out


def _bench(b) -> BenchConfig:
    _keys(b, "bench.", {"rows", "estimators", "repeats", "counts_only"})
    out = BenchConfig()
    if "rows" in b:
        if not isinstance(b["rows"], list) or not b["rows"]:
            raise ConfigError("bench.rows", "must be a non-empty list")
        rows = []
        for i, r in enumerate(b["rows"]):
            path = f"bench.rows[{i}]"
            _keys(r, f"{path}.", {"extent", "resolution", "levels", "T"})
            row = BenchRow(
                extent=_pair(r.get("extent", [8.0, 8.0]), f"{path}.extent", positive=True),
                resolution=_positive(r.get("resolution", 0.1), f"{path}.resolution"),
                levels=_int(r.get("levels", 4), f"{path}.levels", minimum=1),
                T=_int(r.get("T"), f"{path}.T", minimum=1),
            )
            try:
                build_ladder((0.0, 0.0), row.extent, row.resolution, row.levels)
            except NonTiling as e:
                raise ConfigError(f"{path}.extent", str(e)) from None
            rows.append(row)
        out.rows = rows
    if "estimators" in b:
        est = b["estimators"]
        if not isinstance(est, list) or not est or any(e not in ("viterbi", "adaptive") for e in est):
            raise ConfigError("bench.estimators", "must be a non-empty list drawn from viterbi, adaptive")
        out.estimators = tuple(est)
    if "repeats" in b:
        out.repeats = _int(b["repeats"], "bench.repeats", minimum=1)
    if "counts_only" in b:
        if not isinstance(b["counts_only"], bool):
            raise ConfigError("bench.counts_only", "must be true or false")
        out.counts_only = b["counts_only"]
    return out
