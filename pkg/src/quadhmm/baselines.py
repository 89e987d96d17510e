"""Reference estimators: least-squares trilateration, EKF, extended RTS, bootstrap PF.

All recursive estimators share a constant-velocity state ``[x, y, vx, vy]``
driven by white acceleration noise. The default spectral density is chosen
so that one step of position process noise has std ``sigma_x * T_s``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateGeometry, NotEnoughAnchors
from .models import (
    MAX_USED_ANCHORS,
    HmmParams,
    MeasurementFrame,
    anchor_map,
    best_anchor_subset_at,
    observation_logprobs,
)

log = logging.getLogger(__name__)

COV_FLOOR = 1e-12
_GEOM_RTOL = 1e-9


@dataclass
class KinematicState:
    position: np.ndarray
    velocity: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(2)
        self.velocity = np.asarray(self.velocity, dtype=float).reshape(2)
        self.covariance = np.asarray(self.covariance, dtype=float).reshape(4, 4)

    @property
    def mean(self) -> np.ndarray:
        return np.concatenate((self.position, self.velocity))

    @classmethod
    def from_mean(cls, mean, covariance):
        mean = np.asarray(mean, dtype=float)
        return cls(mean[:2], mean[2:], covariance)

    @classmethod
    def biased_start(cls, true_position, bias_fraction=(0.1, 0.1), position_std=0.5, velocity_std=0.5):
        """Start at ``truth * (1 + bias_fraction)`` with diagonal covariance, zero velocity."""
        p = np.asarray(true_position, dtype=float) * (1.0 + np.asarray(bias_fraction, dtype=float))
        cov = np.diag([position_std**2] * 2 + [velocity_std**2] * 2)
        return cls(p, np.zeros(2), cov)


# -- trilateration ---------------------------------------------------------------


def trilaterate(frame: MeasurementFrame, anchors) -> np.ndarray:
    """Linear least-squares fix from all ranges in ``frame``.

    Subtracting the first anchor's range equation from the others gives
    ``2 (P_k - P_1) . p = |P_k|^2 - |P_1|^2 - o_k^2 + o_1^2``.
    """
    if frame.anchor_count < 3:
        raise NotEnoughAnchors(f"trilateration needs 3 ranges, frame t={frame.t} has {frame.anchor_count}")
    amap = anchor_map(anchors)
    ids = list(frame.ranges)
    P = np.array([amap[i] for i in ids])
    o = np.array([frame.ranges[i] for i in ids])
    A = 2.0 * (P[1:] - P[0])
    b = (P[1:] ** 2).sum(1) - (P[0] ** 2).sum() - o[1:] ** 2 + o[0] ** 2
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] <= _GEOM_RTOL * max(sv[0], 1.0):
        raise DegenerateGeometry(f"anchors {ids} are collinear")
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    return sol


@dataclass
class TrilaterationTrack:
    times: np.ndarray
    positions: np.ndarray
    interpolated: np.ndarray  # True where no fix was available

    @property
    def interpolated_count(self) -> int:
        return int(self.interpolated.sum())


def trilateration_track(frames: Sequence[MeasurementFrame], anchors, T_s: float = 0.1) -> TrilaterationTrack:
    """Per-frame fixes; frames without a fix are linearly interpolated in time."""
    amap = anchor_map(anchors)
    times = _frame_times(frames, T_s)
    fixes = np.full((len(frames), 2), np.nan)
    for n, f in enumerate(frames):
        try:
            fixes[n] = trilaterate(f, amap)
        except (NotEnoughAnchors, DegenerateGeometry):
            pass
    missing = np.isnan(fixes[:, 0])
    if missing.all():
        raise NotEnoughAnchors("no frame has three or more ranges")
    ok = ~missing
    # np.interp holds the nearest fix outside the covered span
    out = np.column_stack(
        [np.interp(times, times[ok], fixes[ok, d]) for d in range(2)]
    )
    return TrilaterationTrack(times=times, positions=out, interpolated=missing)


# -- shared motion model ------------------------------------------------------------


def _frame_times(frames, T_s):
    return np.array([f.time if f.time is not None else f.t * T_s for f in frames], dtype=float)


def default_accel_density(params: HmmParams) -> float:
    # q dt^3 / 3 == (sigma_x T_s)^2 at dt == T_s
    return 3.0 * params.sigma_x**2 / params.T_s


def cv_transition(dt: float) -> np.ndarray:
    F = np.eye(4)
    F[0, 2] = F[1, 3] = dt
    return F


def cv_process_noise(dt: float, q: float) -> np.ndarray:
    Q = np.zeros((4, 4))
    Q[0, 0] = Q[1, 1] = q * dt**3 / 3.0
    Q[0, 2] = Q[2, 0] = Q[1, 3] = Q[3, 1] = q * dt**2 / 2.0
    Q[2, 2] = Q[3, 3] = q * dt
    return Q


def _condition(P: np.ndarray) -> np.ndarray:
    P = 0.5 * (P + P.T)
    d = np.diag_indices_from(P)
    P[d] = np.maximum(P[d], COV_FLOOR)
    return P


def _used_ranges(frame: MeasurementFrame, anchors, position, params, best3: bool) -> dict[int, float]:
    if best3 and frame.anchor_count > MAX_USED_ANCHORS:
        keep = best_anchor_subset_at(position, frame, anchors, params)
        return {k: v for k, v in frame.ranges.items() if k in keep}
    return dict(frame.ranges)


# -- EKF / RTS -------------------------------------------------------------------------


@dataclass
class EkfTrack:
    times: np.ndarray
    x_pred: np.ndarray
    P_pred: np.ndarray
    x_filt: np.ndarray
    P_filt: np.ndarray
    F: np.ndarray  # F[k] maps step k-1 to k; F[0] is identity
    innovations: list = field(default_factory=list)

    def __len__(self):
        return len(self.times)

    @property
    def positions(self) -> np.ndarray:
        return self.x_filt[:, :2]

    def states(self) -> list[KinematicState]:
        return [KinematicState.from_mean(x, P) for x, P in zip(self.x_filt, self.P_filt)]


def ekf_update(x, P, frame, anchors, params: HmmParams, best3: bool = True, sigma_o=None):
    """Range update linearized at ``x``; returns ``(x, P, innovation)``."""
    amap = anchor_map(anchors)
    used = _used_ranges(frame, amap, x[:2], params, best3)
    if not used:
        return x, P, np.zeros(0)
    sigma_o = params.sigma_o if sigma_o is None else sigma_o
    ids = list(used)
    z = np.array([used[i] for i in ids])
    diff = x[:2] - np.array([amap[i] for i in ids])
    rng = np.hypot(diff[:, 0], diff[:, 1])
    H = np.zeros((len(ids), 4))
    H[:, :2] = diff / np.maximum(rng, 1e-9)[:, None]
    y = z - rng
    S = H @ P @ H.T + sigma_o**2 * np.eye(len(ids))
    try:
        K = np.linalg.solve(S, H @ P).T
    except np.linalg.LinAlgError:
        K = P @ H.T @ np.linalg.pinv(S)
    x = x + K @ y
    IKH = np.eye(4) - K @ H
    P = IKH @ P @ IKH.T + sigma_o**2 * K @ K.T
    return x, _condition(P), y


def ekf_track(frames: Sequence[MeasurementFrame], anchors, init: KinematicState, params: HmmParams,
              accel_density: float | None = None, best3: bool = True, sigma_o=None) -> EkfTrack:
    """Constant-velocity EKF over range frames.

    The first frame updates ``init`` directly; later frames predict over the
    frame time gap first. Frames without ranges only predict.
    """
    q = default_accel_density(params) if accel_density is None else accel_density
    amap = anchor_map(anchors)
    times = _frame_times(frames, params.T_s)
    n = len(frames)
    xs_p, Ps_p, xs_f, Ps_f, Fs = (np.zeros((n, 4)), np.zeros((n, 4, 4)), np.zeros((n, 4)),
                                  np.zeros((n, 4, 4)), np.zeros((n, 4, 4)))
    x = init.mean
    P = _condition(init.covariance.copy())
    innovations = []
    for k, frame in enumerate(frames):
        F = np.eye(4) if k == 0 else cv_transition(times[k] - times[k - 1])
        if k:
            x = F @ x
            P = _condition(F @ P @ F.T + cv_process_noise(times[k] - times[k - 1], q))
        Fs[k], xs_p[k], Ps_p[k] = F, x, P
        x, P, y = ekf_update(x, P, frame, amap, params, best3, sigma_o)
        innovations.append(y)
        xs_f[k], Ps_f[k] = x, P
    return EkfTrack(times, xs_p, Ps_p, xs_f, Ps_f, Fs, innovations)


def rts_smooth(track: EkfTrack) -> EkfTrack:
    """Backward Rauch-Tung-Striebel pass over stored EKF moments."""
    xs = track.x_filt.copy()
    Ps = track.P_filt.copy()
    for k in range(len(track) - 2, -1, -1):
        F = track.F[k + 1]
        P_pred = track.P_pred[k + 1]
        C = np.linalg.solve(P_pred.T, (track.P_filt[k] @ F.T).T).T
        xs[k] = track.x_filt[k] + C @ (xs[k + 1] - track.x_pred[k + 1])
        Ps[k] = _condition(track.P_filt[k] + C @ (Ps[k + 1] - P_pred) @ C.T)
    return EkfTrack(track.times, track.x_pred, track.P_pred, xs, Ps, track.F, track.innovations)


# -- particle filter -------------------------------------------------------------------


@dataclass
class ParticleSet:
    particles: np.ndarray  # (n, 4)
    weights: np.ndarray

    def __post_init__(self):
        if len(self.particles) != len(self.weights):
            raise ValueError("particle and weight counts differ")

    def mean_position(self) -> np.ndarray:
        return self.weights @ self.particles[:, :2]


@dataclass
class PfTrack:
    times: np.ndarray
    positions: np.ndarray
    degenerate_steps: list[int] = field(default_factory=list)
    final: ParticleSet | None = None


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = len(weights)
    positions = (rng.random() + np.arange(n)) / n
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, positions, side="right")


def pf_track(frames: Sequence[MeasurementFrame], anchors, particle_count: int, params: HmmParams,
             seed: int, init: KinematicState, accel_density: float | None = None,
             best3: bool = True) -> PfTrack:
    """Bootstrap particle filter with MMSE (weighted mean) output."""
    if particle_count < 1:
        raise ValueError("particle_count must be >= 1")
    rng = np.random.default_rng(seed)
    q = default_accel_density(params) if accel_density is None else accel_density
    amap = anchor_map(anchors)
    times = _frame_times(frames, params.T_s)
    L0 = np.linalg.cholesky(_condition(init.covariance.copy()))
    parts = init.mean + rng.standard_normal((particle_count, 4)) @ L0.T
    weights = np.full(particle_count, 1.0 / particle_count)
    out = np.zeros((len(frames), 2))
    degenerate = []
    for k, frame in enumerate(frames):
        if k:
            dt = times[k] - times[k - 1]
            Lq = np.linalg.cholesky(_condition(cv_process_noise(dt, q)))
            parts = parts @ cv_transition(dt).T + rng.standard_normal(parts.shape) @ Lq.T
        if frame.ranges:
            loglik = observation_logprobs(parts[:, :2], frame, amap, params, best3=best3)
            logw = np.log(weights) + loglik
            total = logsumexp(logw)
            if not np.isfinite(total):
                log.warning("particle weights degenerate at frame %d; resetting", k)
                degenerate.append(k)
                weights = np.full(particle_count, 1.0 / particle_count)
            else:
                weights = np.exp(logw - total)
                weights /= weights.sum()
        out[k] = weights @ parts[:, :2]
        idx = systematic_resample(weights, rng)
        parts = parts[idx]
        weights = np.full(particle_count, 1.0 / particle_count)
    return PfTrack(times=times, positions=out, degenerate_steps=degenerate,
                   final=ParticleSet(parts, weights))
