"""Closed-loop integration with exact event landings.

The FwAT gains blow up like ``1/(tf - t)`` (and ``1/(t1 - t)`` for the
tracking term), so integration stops at ``tf - eps_guard`` and the step size
is capped at ``kappa * (singular_time - t)``.  Switch times, the ``t1``
handoff and any user landings split the horizon into segments; each segment
is integrated with its own frozen vector field (hard restart, no dense output
across a discontinuity).
"""

from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .graph import GraphSource, LaplacianMatrix, SwitchingSchedule, active_laplacian, min_lambda2, resolve_graph
from .protocol import (
    FwatParams,
    Saturation,
    SecondOrderState,
    _double_law,
    capped_exp,
    check_gain_condition,
)

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "NonFiniteStateError",
    "Segment",
    "integrate_segments",
    "integrate_single",
    "integrate_double",
    "integrate_pure_tracking",
    "consensus_delta",
]

METHODS = ("rk4_fixed", "rk45_adaptive")


# beyond this magnitude squared norms overflow, so the run is treated as diverged
MAX_STATE = 1e150


def _usable(y: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(y)) and np.max(np.abs(y), initial=0.0) <= MAX_STATE)


class NonFiniteStateError(FloatingPointError):
    """Integration produced NaN or Inf."""

    def __init__(self, message: str, last_good_time: float):
        super().__init__(f"{message} (last good time {last_good_time:.17g})")
        self.last_good_time = last_good_time


@dataclass(frozen=True)
class IntegratorConfig:
    """Integrator settings.

    ``dt_base`` is the fixed step for ``rk4_fixed`` and the initial/maximum
    step for ``rk45_adaptive``.  ``eps_guard`` defaults to
    ``max(1e-3, 1e-3 * (tf - t0))``.  ``kappa`` caps the step at
    ``kappa * (singular_time - t)``; explicit RK4 stays stable only while
    ``kappa * eta * lambda_max**2`` is below about 2.7, so fixed-step runs on
    stiff graphs need a smaller ``kappa``.
    """

    method: str = "rk45_adaptive"
    dt_base: float = 0.01
    eps_guard: float | None = None
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    seed: int = 0
    kappa: float = 0.1
    coast: float = 0.0
    max_steps: int = 2_000_000

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.dt_base > 0:
            raise ValueError("dt_base must be positive")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not 0 < self.kappa <= 1:
            raise ValueError("kappa must lie in (0, 1]")
        if self.coast < 0:
            raise ValueError("coast must be non-negative")

    def guard(self, t0: float, tf: float) -> float:
        eps = max(1e-3, 1e-3 * (tf - t0)) if self.eps_guard is None else float(self.eps_guard)
        if not 0 < eps < tf - t0:
            raise ValueError(f"eps_guard={eps} must lie in (0, {tf - t0})")
        return eps


# ---------------------------------------------------------------------------
# trajectory container


@dataclass
class Trajectory:
    """Sampled closed-loop run, one row per accepted step.

    ``x`` holds agent states stacked as ``n * dim`` columns (``dim=2`` for
    planar formation error coordinates).  ``v`` is present for second-order
    runs.  ``z_norm`` is NaN where no tracking error is defined.
    """

    mode: str
    times: np.ndarray
    x: np.ndarray
    u: np.ndarray
    V: np.ndarray
    avg: np.ndarray
    z_norm: np.ndarray
    sat_count: np.ndarray
    v: np.ndarray | None = None
    dim: int = 1
    extras: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.x.shape[1] // self.dim

    @property
    def avg_drift(self) -> np.ndarray:
        return np.abs(self.avg - self.avg[0])

    def columns(self) -> tuple[list[str], np.ndarray]:
        m = self.x.shape[1]
        names = ["t"] + [f"x_{k}" for k in range(1, m + 1)]
        blocks = [self.times[:, None], self.x]
        if self.v is not None:
            names += [f"v_{k}" for k in range(1, m + 1)]
            blocks.append(self.v)
        names += [f"u_{k}" for k in range(1, m + 1)] + ["V", "avg", "z_norm", "sat_count"]
        blocks += [self.u, self.V[:, None], self.avg[:, None], self.z_norm[:, None], self.sat_count[:, None]]
        for key, col in self.extras.items():
            names.append(key)
            blocks.append(np.asarray(col, dtype=float)[:, None])
        return names, np.hstack(blocks)

    def to_csv(self, path: str | Path) -> None:
        names, data = self.columns()
        # %.17g round-trips doubles, so certificates recomputed from the file match exactly
        np.savetxt(path, data, delimiter=",", header=",".join(names), comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path: str | Path, mode: str = "single", dim: int = 1) -> "Trajectory":
        with open(path) as fh:
            names = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        col = {name: k for k, name in enumerate(names)}

        def block(prefix: str) -> np.ndarray | None:
            keys = [k for k in names if k.startswith(prefix) and k[len(prefix):].isdigit()]
            if not keys:
                return None
            return data[:, [col[k] for k in keys]]

        core = {"t", "V", "avg", "z_norm", "sat_count"}
        extras = {
            k: data[:, col[k]]
            for k in names
            if k not in core and not any(k.startswith(p) and k[2:].isdigit() for p in ("x_", "v_", "u_"))
        }
        return cls(
            mode=mode,
            times=data[:, col["t"]],
            x=block("x_"),
            u=block("u_"),
            V=data[:, col["V"]],
            avg=data[:, col["avg"]],
            z_norm=data[:, col["z_norm"]],
            sat_count=data[:, col["sat_count"]],
            v=block("v_"),
            dim=dim,
            extras=extras,
        )


def consensus_delta(x: np.ndarray, dim: int = 1) -> np.ndarray:
    """Deviation from the per-coordinate average; works on one state or a stack of rows."""
    x = np.asarray(x, dtype=float)
    shape = x.shape
    per = x.reshape(shape[:-1] + (-1, dim))
    return (per - per.mean(axis=-2, keepdims=True)).reshape(shape)


# ---------------------------------------------------------------------------
# steppers

# Dormand-Prince 5(4)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


@dataclass
class Segment:
    """One smooth piece of the horizon.

    ``rhs(t, y)`` is the frozen vector field, ``singular_time`` the time the
    step ceiling shrinks towards, and ``output(t, y, sat)`` the applied input
    recorded for samples that start this segment.
    """

    t_start: float
    t_end: float
    rhs: Callable[[float, np.ndarray], np.ndarray]
    singular_time: float
    output: Callable[[float, np.ndarray, Saturation], np.ndarray]


@dataclass
class _Stats:
    steps: int = 0
    rejected: int = 0
    rhs_calls: int = 0


def _rms(v: np.ndarray) -> float:
    # an overflowing trial step yields inf here and is simply rejected
    with np.errstate(over="ignore"):
        return float(np.sqrt(np.mean(v * v)))


def _clip_step(h: float, t: float, t_end: float) -> tuple[float, bool]:
    remaining = t_end - t
    if h >= remaining * (1 - 1e-10):
        return remaining, True
    if h > 0.5 * remaining:
        # split the tail evenly instead of leaving a sliver step
        return 0.5 * remaining, False
    return h, False


def _rk4_segment(seg: Segment, t: float, y: np.ndarray, cfg: IntegratorConfig, stats: _Stats, out: list):
    f = seg.rhs
    while True:
        cap = min(cfg.dt_base, cfg.kappa * (seg.singular_time - t))
        h, last = _clip_step(cap, t, seg.t_end)
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        stats.rhs_calls += 4
        y_new = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not _usable(y_new):
            raise NonFiniteStateError("rk4 step produced a non-finite or diverged state", t)
        t = seg.t_end if last else t + h
        y = y_new
        stats.steps += 1
        out.append((t, y))
        if last:
            return t, y
        if stats.steps > cfg.max_steps:
            raise RuntimeError("step budget exhausted")


def _initial_step(f, t, y, f0, cfg: IntegratorConfig, h_max: float, stats: _Stats) -> float:
    scale = cfg.abs_tol + cfg.rel_tol * np.abs(y)
    d0, d1 = _rms(y / scale), _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, h_max)
    f1 = f(t + h0, y + h0 * f0)
    stats.rhs_calls += 1
    if not np.all(np.isfinite(f1)):
        return h0 * 1e-3
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, h_max)


def _dopri_segment(seg: Segment, t: float, y: np.ndarray, h: float | None, cfg: IntegratorConfig,
                   stats: _Stats, out: list):
    f = seg.rhs
    k1 = f(t, y)
    stats.rhs_calls += 1
    if not np.all(np.isfinite(k1)):
        raise NonFiniteStateError("vector field is non-finite", t)

    def ceiling(tt):
        return min(cfg.dt_base, cfg.kappa * (seg.singular_time - tt))

    if h is None:
        h = _initial_step(f, t, y, k1, cfg, min(ceiling(t), seg.t_end - t), stats)
    K = np.empty((7, y.size))
    while True:
        h = min(h, ceiling(t))
        h, last = _clip_step(h, t, seg.t_end)
        K[0] = k1
        for s in range(1, 6):
            ys = y + h * (np.dot(_A[s], K[:s]))
            K[s] = f(t + _C[s] * h, ys)
        y_new = y + h * np.dot(_B, K[:6])
        t_new = seg.t_end if last else t + h
        K[6] = f(t_new, y_new)
        stats.rhs_calls += 6

        finite = np.all(np.isfinite(K)) and _usable(y_new)
        if finite:
            err = h * np.dot(_E, K)
            scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = _rms(err / scale)
        else:
            err_norm = math.inf

        if err_norm <= 1.0:
            t, y, k1 = t_new, y_new, K[6].copy()
            stats.steps += 1
            out.append((t, y))
            factor = 5.0 if err_norm == 0 else min(5.0, max(0.2, 0.9 * err_norm ** -0.2))
            h_next = h * factor
            if last:
                return t, y, h_next
            h = h_next
            if stats.steps > cfg.max_steps:
                raise RuntimeError("step budget exhausted")
        else:
            stats.rejected += 1
            factor = 0.2 if not finite else max(0.2, 0.9 * err_norm ** -0.2)
            h *= min(factor, 0.9)
            if h < 16 * np.finfo(float).eps * max(abs(t), 1.0):
                if not finite:
                    raise NonFiniteStateError("step size underflow on a non-finite state", t)
                raise RuntimeError(f"step size underflow at t={t}")


def integrate_segments(segments: Sequence[Segment], y0: np.ndarray, cfg: IntegratorConfig):
    """Integrate across consecutive segments.

    Returns ``(times, states, seg_of_sample, stats)`` where ``seg_of_sample[k]``
    is the segment whose law governs the motion leaving sample ``k``.
    """
    y = np.asarray(y0, dtype=float).copy()
    if not np.all(np.isfinite(y)):
        raise ValueError("initial state has non-finite entries")
    t = segments[0].t_start
    out = [(t, y.copy())]
    stats = _Stats()
    h = None
    for seg in segments:
        if seg.t_start != t:
            raise ValueError("segments must be contiguous")
        if cfg.method == "rk4_fixed":
            t, y = _rk4_segment(seg, t, y, cfg, stats, out)
        else:
            t, y, h = _dopri_segment(seg, t, y, h, cfg, stats, out)
    times = np.array([s[0] for s in out])
    states = np.array([s[1] for s in out])
    starts = [s.t_start for s in segments]
    seg_of = np.array([min(bisect.bisect_right(starts, tt) - 1, len(segments) - 1) for tt in times])
    return times, states, seg_of, stats


def _breakpoints(t0: float, t_end: float, required: Iterable[float]) -> list[float]:
    pts = sorted({float(p) for p in required if t0 < p < t_end})
    return [t0] + pts + [t_end]


# ---------------------------------------------------------------------------
# single integrator


def _laplacian_at(source, t: float) -> np.ndarray:
    if isinstance(source, SwitchingSchedule):
        return active_laplacian(source, t).entries
    return source.entries


def _lambda2_of(source) -> float | None:
    if isinstance(source, SwitchingSchedule):
        try:
            return min_lambda2(source)
        except ValueError:
            return None
    return source.lambda2


def _events(source, t0: float, t_end: float) -> list[float]:
    if isinstance(source, SwitchingSchedule):
        return source.event_times(t0, t_end)
    return []


# RK4's real-axis stability interval is about [-2.785, 0]
RK4_STABILITY = 2.785


def _lambda_max(source) -> float:
    mats = source.laplacians if isinstance(source, SwitchingSchedule) else (source,)
    return max(float(np.abs(m.entries).sum(axis=1).max()) for m in mats)


def _warn_rk4_stiffness(cfg: IntegratorConfig, params: FwatParams, source, x0: np.ndarray) -> None:
    # the linearized single-integrator law has eigenvalues down to about
    # -eta/(tf-t) * lambda_max^2 * max(exp(-L x)); RK4 needs h times that above -2.785
    if cfg.method != "rk4_fixed":
        return
    lam = _lambda_max(source)  # Gershgorin bound
    mats = source.laplacians if isinstance(source, SwitchingSchedule) else (source,)
    weight = max(float(np.exp(np.clip(np.abs(m.entries @ x0).max(), 0, 50))) for m in mats)
    start = min(cfg.dt_base, cfg.kappa * (params.tf - params.t0)) * params.eta / (params.tf - params.t0)
    worst = max(cfg.kappa * params.eta * lam**2, start * lam**2 * weight)
    if worst > RK4_STABILITY:
        warnings.warn(
            f"rk4_fixed may go unstable: step times stiffness can reach {worst:.3g} > {RK4_STABILITY}; "
            "lower kappa or dt_base",
            RuntimeWarning,
            stacklevel=3,
        )


def _single_rhs(law: str, Lm: np.ndarray, params: FwatParams, sat: Saturation):
    gain_num = params.eta
    tf = params.tf
    if law == "fwat":
        def rhs(t, x):
            return (gain_num / (tf - t)) * (Lm @ capped_exp(-(Lm @ x), sat))
    elif law == "pal":
        def rhs(t, x):
            return -(gain_num / (tf - t)) * (1.0 - capped_exp(-(Lm @ x), sat))
    else:
        raise ValueError(f"unknown single-integrator law {law!r}")
    return rhs


def integrate_single(
    x0,
    graph: GraphSource,
    params: FwatParams,
    cfg: IntegratorConfig | None = None,
    law: str = "fwat",
    landings: Iterable[float] = (),
) -> Trajectory:
    """Integrate ``xdot = u`` from ``t0`` to ``tf - eps_guard``.

    Args:
        x0: initial agent states.
        graph: fixed topology/Laplacian or a switching schedule.
        params: gains and times (``eta``, ``t0``, ``tf``).
        cfg: integrator settings.
        law: ``"fwat"`` for the average-preserving law, ``"pal"`` for the
            earlier non-conservative law.
        landings: extra times the integrator must sample exactly.
    """
    cfg = cfg or IntegratorConfig()
    source = resolve_graph(graph)
    x0 = np.asarray(x0, dtype=float)
    lam2 = _lambda2_of(source)
    gain_ok = check_gain_condition(params, lam2) if law == "fwat" else None
    _warn_rk4_stiffness(cfg, params, source, x0)
    eps = cfg.guard(params.t0, params.tf)
    t_end = params.tf - eps

    sat = Saturation()
    pts = _breakpoints(params.t0, t_end, list(_events(source, params.t0, t_end)) + list(landings))
    segments = []
    for a, b in zip(pts, pts[1:]):
        Lm = _laplacian_at(source, a)

        def output(t, x, s, Lm=Lm):
            return _single_rhs(law, Lm, params, s)(t, x)

        segments.append(Segment(a, b, _single_rhs(law, Lm, params, sat), params.tf, output))

    times, xs, seg_of, stats = integrate_segments(segments, x0, cfg)
    us, sats = _sample_outputs(segments, times, xs, seg_of)

    if cfg.coast > 0:
        times = np.append(times, [params.tf, params.tf + cfg.coast])
        xs = np.vstack([xs, xs[-1], xs[-1]])
        us = np.vstack([us, np.zeros((2, xs.shape[1]))])
        sats = np.append(sats, [0, 0])

    delta = consensus_delta(xs)
    return Trajectory(
        mode="single",
        times=times,
        x=xs,
        u=us,
        V=np.sum(delta * delta, axis=1),
        avg=xs.mean(axis=1),
        z_norm=np.full(times.size, np.nan),
        sat_count=sats.astype(float),
        meta=_meta(params, cfg, eps, lam2, gain_ok, sat, stats, law=law),
    )


def _sample_outputs(segments, times, ys, seg_of):
    us, sats = [], []
    for t, y, k in zip(times, ys, seg_of):
        s = Saturation()
        us.append(segments[k].output(t, y, s))
        sats.append(s.count)
    return np.array(us), np.array(sats)


def _meta(params, cfg, eps, lam2, gain_ok, sat, stats, **extra) -> dict:
    meta = {
        "params": {"eta": params.eta, "eta2": params.eta2, "t0": params.t0, "t1": params.t1, "tf": params.tf},
        "method": cfg.method,
        "rel_tol": cfg.rel_tol,
        "abs_tol": cfg.abs_tol,
        "eps_guard": eps,
        "lambda2": lam2,
        "gain_condition": gain_ok,
        "sat_total": sat.count,
        "steps": stats.steps,
        "rejected": stats.rejected,
        "rhs_calls": stats.rhs_calls,
    }
    meta.update(extra)
    return meta


# ---------------------------------------------------------------------------
# double integrator


def double_segments(source, params: FwatParams, eps: float, landings: Iterable[float], sat: Saturation,
                    make_rhs, make_output, extra_events: Iterable[float] = ()) -> list[Segment]:
    """Segments for a three-branch law: ``[t0, t1-eps]`` with the tracking
    correction, ``[t1-eps, t1]`` without it, then ``[t1, tf-eps]``.

    ``make_rhs(Lm, correction, sat)`` and ``make_output(Lm, correction)``
    build the per-segment vector field and recorded input.
    """
    t1, tf = params.t1, params.tf
    if not params.t0 < t1 - eps:
        raise ValueError(f"eps_guard={eps} leaves no room before t1={t1}")
    t_end = tf - eps
    required = [t1 - eps, t1] + list(_events(source, params.t0, t_end)) + list(landings) + list(extra_events)
    pts = _breakpoints(params.t0, t_end, required)
    segments = []
    for a, b in zip(pts, pts[1:]):
        Lm = _laplacian_at(source, a)
        correction = b <= t1 - eps
        singular = t1 if correction else tf
        segments.append(Segment(a, b, make_rhs(Lm, correction, sat), singular, make_output(Lm, correction)))
    return segments


def integrate_double(
    state0: SecondOrderState,
    graph: GraphSource,
    params: FwatParams,
    cfg: IntegratorConfig | None = None,
    landings: Iterable[float] = (),
) -> Trajectory:
    """Integrate ``xdot = v, vdot = u`` under the three-branch FwAT law.

    The tracking correction is active on ``[t0, t1 - eps_guard]``; on the
    guard interval ``[t1 - eps_guard, t1)`` it is dropped because its gain is
    singular at ``t1`` (the term itself is already of order
    ``eps_guard**(eta2 - 1)`` there).
    """
    params.require_double()
    cfg = cfg or IntegratorConfig()
    source = resolve_graph(graph)
    lam2 = _lambda2_of(source)
    gain_ok = check_gain_condition(params, lam2, double=True)
    eps = cfg.guard(params.t0, params.tf)
    n = state0.x.size
    sat = Saturation()

    def make_rhs(Lm, correction, s):
        def rhs(t, y):
            x, v = y[:n], y[n:]
            return np.concatenate([v, _double_law(x, v, Lm, params, t, s, correction)])
        return rhs

    def make_output(Lm, correction):
        def output(t, y, s):
            return _double_law(y[:n], y[n:], Lm, params, t, s, correction)
        return output

    segments = double_segments(source, params, eps, landings, sat, make_rhs, make_output)
    y0 = np.concatenate([state0.x, state0.v])
    times, ys, seg_of, stats = integrate_segments(segments, y0, cfg)
    us, sats = _sample_outputs(segments, times, ys, seg_of)
    xs, vs = ys[:, :n], ys[:, n:]

    z_norm = np.empty(times.size)
    for k, (t, x, v) in enumerate(zip(times, xs, vs)):
        Lm = _laplacian_at(source, t)
        z = v - (params.eta / (params.tf - t)) * (Lm @ capped_exp(-(Lm @ x)))
        z_norm[k] = np.linalg.norm(z)

    if cfg.coast > 0:
        # u = 0 after tf: velocities hold, positions drift linearly
        extra_t = np.array([params.tf, params.tf + cfg.coast])
        x_tf = xs[-1] + vs[-1] * (params.tf - times[-1])
        xs = np.vstack([xs, x_tf, x_tf + vs[-1] * cfg.coast])
        vs = np.vstack([vs, vs[-1], vs[-1]])
        times = np.append(times, extra_t)
        us = np.vstack([us, np.zeros((2, n))])
        sats = np.append(sats, [0, 0])
        z_norm = np.append(z_norm, [np.nan, np.nan])

    delta = consensus_delta(xs)
    return Trajectory(
        mode="double",
        times=times,
        x=xs,
        u=us,
        V=np.sum(delta * delta, axis=1),
        avg=xs.mean(axis=1),
        z_norm=z_norm,
        sat_count=sats.astype(float),
        v=vs,
        meta=_meta(params, cfg, eps, lam2, gain_ok, sat, stats),
    )


# ---------------------------------------------------------------------------
# isolated tracking subsystem


def integrate_pure_tracking(
    z0,
    eta2: float,
    t0: float,
    t1: float,
    cfg: IntegratorConfig | None = None,
    landings: Iterable[float] = (),
) -> Trajectory:
    """Integrate ``zdot = -eta2/(t1 - t) (1 - exp(-z))`` on ``[t0, t1 - eps_guard]``.

    The result stores ``z`` in the ``x`` columns.  Its exact solution is
    ``ln(1 + c (t1 - t)**eta2)`` with ``c = (exp(z0) - 1) / (t1 - t0)**eta2``.
    """
    if not eta2 > 1:
        raise ValueError(f"eta2 must exceed 1, got {eta2}")
    cfg = cfg or IntegratorConfig()
    eps = cfg.guard(t0, t1)
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    sat = Saturation()

    def field_(s):
        def rhs(t, z):
            return -(eta2 / (t1 - t)) * (1.0 - capped_exp(-z, s))
        return rhs

    pts = _breakpoints(t0, t1 - eps, landings)
    segments = [Segment(a, b, field_(sat), t1, lambda t, z, s: field_(s)(t, z)) for a, b in zip(pts, pts[1:])]
    times, zs, seg_of, stats = integrate_segments(segments, z0, cfg)
    us, sats = _sample_outputs(segments, times, zs, seg_of)
    return Trajectory(
        mode="pure_tracking",
        times=times,
        x=zs,
        u=us,
        V=np.sum(zs * zs, axis=1),
        avg=zs.mean(axis=1),
        z_norm=np.linalg.norm(zs, axis=1),
        sat_count=sats.astype(float),
        meta={"eta2": eta2, "t0": t0, "t1": t1, "eps_guard": eps, "method": cfg.method,
              "sat_total": sat.count, "steps": stats.steps, "rejected": stats.rejected},
    )
