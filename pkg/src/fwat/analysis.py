"""Runtime oracles and certificates for FwAT trajectories.

Everything here is a pure function of its inputs: running a certificate twice
on the same trajectory (or on the trajectory reloaded from its CSV) gives the
same answer.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .graph import GraphSource, LaplacianMatrix, SwitchingSchedule, active_laplacian, min_lambda2, resolve_graph
from .protocol import FwatParams
from .sim import Trajectory, consensus_delta

__all__ = [
    "Certificate",
    "CounterexampleReport",
    "LyapunovReport",
    "consensus_error",
    "check_scalar_inequality",
    "check_vector_inequality",
    "counterexample_report",
    "settling_certificate",
    "average_conservation_certificate",
    "tracking_certificate",
    "iss_bound_check",
    "lyapunov_monitor",
    "rate_envelope_check",
    "certify",
]

KINDS = ("consensus", "tracking", "boundedness", "average_conservation", "lyapunov")


@dataclass(frozen=True)
class Certificate:
    """Outcome of one sampled check.

    ``witness_value``/``witness_time`` locate the worst residual that decided
    the verdict.
    """

    kind: str
    achieved: bool
    achieved_time: float | None
    tolerance_used: float
    witness_value: float
    witness_time: float
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown certificate kind {self.kind!r}")

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


# ---------------------------------------------------------------------------
# algebraic oracles


def consensus_error(x) -> tuple[np.ndarray, float]:
    """Return ``(x - mean(x) 1, mean(x))``."""
    x = np.asarray(x, dtype=float)
    xbar = float(x.mean())
    return x - xbar, xbar


def check_scalar_inequality(x: float, y: float) -> bool:
    """``-x(1 - e^-x) >= -y(1 - e^-y)`` for ``0 < x <= y``, evaluated with zero slack."""
    if not 0 < x <= y:
        raise ValueError(f"need 0 < x <= y, got x={x}, y={y}")
    return bool(-x * -np.expm1(-x) >= -y * -np.expm1(-y))


def check_vector_inequality(x, slack: float = 1e-12) -> tuple[float, float, bool]:
    """Both sides of ``-||x||(1 - e^-||x||) >= -x^T(1 - e^-x)``.

    ``holds`` allows ``slack * (1 + |rhs|)`` of round-off.
    """
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    lhs = -r * -np.expm1(-r)
    rhs = -float(x @ -np.expm1(-x))
    return lhs, rhs, bool(lhs >= rhs - slack * (1.0 + abs(rhs)))


@dataclass(frozen=True)
class CounterexampleReport:
    """Why ``lambda2 ||x||^2 <= x^T L x`` fails on all of R^n but holds on 1-perp."""

    n: int
    lambda2: float
    lambda2_n: float
    ones_L_ones: float
    full_space_inequality_fails: bool
    samples: int
    worst_deflated_margin: float
    deflated_inequality_holds: bool


def counterexample_report(L: LaplacianMatrix, samples: int = 10_000, seed: int = 0,
                          tol: float = 1e-9) -> CounterexampleReport:
    """Evaluate the inequality at ``x = 1`` and on random vectors orthogonal to ``1``."""
    entries = L.entries
    n = entries.shape[0]
    lam2 = L.lambda2
    if lam2 <= 0:
        raise ValueError("counterexample check needs a connected graph")
    if np.array_equal(entries, np.round(entries)):
        ones_L_ones = float(int(np.round(entries).astype(np.int64).sum()))
    else:
        ones_L_ones = float(entries.sum())
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((samples, n))
    y -= y.mean(axis=1, keepdims=True)
    quad = np.einsum("ki,ij,kj->k", y, entries, y)
    margin = quad - lam2 * np.sum(y * y, axis=1)
    worst = float(margin.min()) if samples else 0.0
    return CounterexampleReport(
        n=n,
        lambda2=lam2,
        lambda2_n=lam2 * n,
        ones_L_ones=ones_L_ones,
        full_space_inequality_fails=bool(lam2 * n > 0 and ones_L_ones == 0),
        samples=samples,
        worst_deflated_margin=worst,
        deflated_inequality_holds=bool(worst >= -tol),
    )


# ---------------------------------------------------------------------------
# trajectory certificates


def _inf_error(traj: Trajectory) -> np.ndarray:
    return np.max(np.abs(consensus_delta(traj.x, traj.dim)), axis=1)


def settling_certificate(traj: Trajectory, tol: float = 1e-3) -> Certificate:
    """Consensus reached at the final sample and held from ``achieved_time`` on."""
    err = _inf_error(traj)
    bad = np.flatnonzero(err > tol)
    achieved = bool(err[-1] <= tol)
    if achieved:
        first = 0 if bad.size == 0 else int(bad[-1]) + 1
        window = slice(first, None)
        k = first + int(np.argmax(err[window]))
        t_ach = float(traj.times[first])
    else:
        k = err.size - 1
        t_ach = None
    return Certificate("consensus", achieved, t_ach, tol, float(err[k]), float(traj.times[k]),
                       {"final_error": float(err[-1])})


def average_conservation_certificate(traj: Trajectory, tol: float = 1e-8) -> Certificate:
    """The recorded ``avg`` column never drifts more than ``tol`` from its start."""
    drift = np.abs(traj.avg - traj.avg[0])
    k = int(np.argmax(drift))
    ok = bool(drift[k] <= tol)
    return Certificate("average_conservation", ok, float(traj.times[0]) if ok else None, tol,
                       float(drift[k]), float(traj.times[k]))


def tracking_certificate(traj: Trajectory, t1: float, tol: float = 1e-3) -> Certificate:
    """``||z||`` at the last sample before ``t1`` is within ``tol``."""
    idx = np.flatnonzero(traj.times < t1)
    if idx.size == 0:
        raise ValueError("trajectory has no samples before t1")
    k = int(idx[-1])
    val = float(traj.z_norm[k])
    ok = bool(val <= tol)
    return Certificate("tracking", ok, float(traj.times[k]) if ok else None, tol, val, float(traj.times[k]))


def _cumtrapz(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))])


def iss_bound_check(traj: Trajectory, L, params: FwatParams, rel_slack: float = 1e-6) -> Certificate:
    """Bounded transient on ``[t0, t1]`` of a second-order run.

    Checks ``xi(t) <= xi(t0) + lambda2 * int ||z||`` with ``xi = lambda2 ||P x||``
    and ``||x_perp(t) - x_perp(t0)|| <= int ||z||``, both on the samples.
    """
    params.require_double()
    lam2 = L.lambda2 if isinstance(L, LaplacianMatrix) else min_lambda2(L)
    sel = traj.times <= params.t1
    t = traj.times[sel]
    x = traj.x[sel]
    z = traj.z_norm[sel]
    par = consensus_delta(x, traj.dim)
    perp = x - par
    xi = lam2 * np.linalg.norm(par, axis=1)
    integral = _cumtrapz(z, t)

    slack = rel_slack * (1.0 + xi[0])
    margin_xi = xi[0] + lam2 * integral + slack - xi
    drift = np.linalg.norm(perp - perp[0], axis=1)
    margin_perp = integral + rel_slack - drift

    k_xi = int(np.argmin(margin_xi))
    k_perp = int(np.argmin(margin_perp))
    ok = bool(margin_xi[k_xi] >= 0 and margin_perp[k_perp] >= 0)
    worst = k_xi if margin_xi[k_xi] <= margin_perp[k_perp] else k_perp
    return Certificate(
        "boundedness", ok, float(t[-1]) if ok else None, slack,
        float(min(margin_xi[k_xi], margin_perp[k_perp])), float(t[worst]),
        {
            "xi_max": float(xi.max()),
            "xi_bound_min_margin": float(margin_xi[k_xi]),
            "perp_bound_min_margin": float(margin_perp[k_perp]),
            "integral_z": float(integral[-1]),
            # the bound drops the stabilizing term; how loose it is on this run
            "xi_over_bound_at_t1": float(xi[-1] / (xi[0] + lam2 * integral[-1] + slack)),
        },
    )


@dataclass
class LyapunovReport:
    """Sampled ``V = delta^T delta`` with monotonicity and derivative-bound flags."""

    times: np.ndarray
    V: np.ndarray
    dV: np.ndarray
    uphill_steps: np.ndarray
    bound_violations: np.ndarray | None = None

    @property
    def monotone(self) -> bool:
        return self.uphill_steps.size == 0

    @property
    def bound_ok(self) -> bool | None:
        return None if self.bound_violations is None else self.bound_violations.size == 0

    def certificate(self) -> Certificate:
        worst = int(np.argmax(self.dV)) if self.dV.size else 0
        ok = self.monotone and self.bound_ok is not False
        return Certificate("lyapunov", ok, float(self.times[0]) if ok else None, 1e-9,
                           float(self.dV[worst]) if self.dV.size else 0.0, float(self.times[worst]),
                           {"uphill_steps": int(self.uphill_steps.size),
                            "bound_violations": None if self.bound_violations is None
                            else int(self.bound_violations.size)})


def _noise_floor(x: np.ndarray, V: np.ndarray, rel_tol: float, abs_tol: float) -> np.ndarray:
    # change in V from perturbing each state by one local-error tolerance
    d = np.sqrt(x.shape[1]) * (abs_tol + rel_tol * np.max(np.abs(x), axis=1))
    return d * (2 * np.sqrt(V) + d)


def _laplacian_fn(graph):
    src = resolve_graph(graph)
    if isinstance(src, SwitchingSchedule):
        return lambda t: active_laplacian(src, t).entries
    return lambda t: src.entries


def lyapunov_monitor(traj: Trajectory, graph: GraphSource | None = None, params: FwatParams | None = None,
                     rel_uphill: float = 1e-9, rel_slack: float = 1e-6, rel_tol: float | None = None,
                     abs_tol: float | None = None) -> LyapunovReport:
    """Flag uphill steps of ``V`` and, given the graph, check the derivative bound.

    Changes of ``V`` smaller than one integrator local-error tolerance can move
    it are never flagged.  ``rel_tol``/``abs_tol`` default to the values stored
    in ``traj.meta`` (or the integrator defaults).

    The bound ``Vdot <= -2 eta/(tf-t) ||L d|| (1 - e^-||L d||)`` is checked in
    sampled form: each step's difference quotient must not exceed the larger
    of the bound's two endpoint values (the bound is negative, so this is the
    weaker one), with the step's own Laplacian at both ends.
    """
    t, V, x = traj.times, traj.V, traj.x
    dV = np.diff(V)
    rel_tol = traj.meta.get("rel_tol", 1e-8) if rel_tol is None else rel_tol
    abs_tol = traj.meta.get("abs_tol", 1e-10) if abs_tol is None else abs_tol
    floor = _noise_floor(x, V, rel_tol, abs_tol)
    # written as a negation so NaN steps count as uphill
    uphill = np.flatnonzero(~(dV <= rel_uphill * V[:-1] + np.maximum(floor[:-1], floor[1:])))

    violations = None
    if graph is not None and params is not None:
        lap_at = _laplacian_fn(graph)
        delta = consensus_delta(x, traj.dim)
        bad = []
        for k in range(t.size - 1):
            if t[k + 1] >= params.tf:
                break
            Lm = lap_at(t[k])
            b = []
            for j in (k, k + 1):
                r = np.linalg.norm(Lm @ delta[j])
                b.append(-2 * params.eta / (params.tf - t[j]) * r * -np.expm1(-r))
            h = t[k + 1] - t[k]
            allowed = max(b) + rel_slack * max(abs(b[0]), abs(b[1])) + max(floor[k], floor[k + 1]) / h
            if dV[k] / h > allowed:
                bad.append(k)
        violations = np.array(bad, dtype=int)
    return LyapunovReport(times=t, V=V, dV=dV, uphill_steps=uphill, bound_violations=violations)


def rate_envelope_check(traj: Trajectory, lambda2: float, params: FwatParams, tol: float = 1e-6) -> Certificate:
    """``xi = lambda2 sqrt(V)`` against the envelope ``-eta lambda2^2/(tf-t) (1 - e^-xi)``.

    Sampled form: ``xi[k+1] <= xi[k] + h * max(env[k], env[k+1]) + tol``.
    """
    t = traj.times
    sel = t < params.tf
    t = t[sel]
    xi = lambda2 * np.sqrt(traj.V[sel])
    env = -params.eta * lambda2**2 / (params.tf - t) * -np.expm1(-xi)
    h = np.diff(t)
    bound = xi[:-1] + h * np.maximum(env[:-1], env[1:]) + tol
    margin = bound - xi[1:]
    k = int(np.argmin(margin)) if margin.size else 0
    ok = bool(margin.size == 0 or margin[k] >= 0)
    return Certificate("lyapunov", ok, float(t[0]) if ok else None, tol,
                       float(margin[k]) if margin.size else 0.0, float(t[k + 1]) if margin.size else float(t[0]),
                       {"check": "rate_envelope"})


def certify(traj: Trajectory, graph: GraphSource, params: FwatParams, tol: float = 1e-3,
            avg_tol: float = 1e-8) -> list[Certificate]:
    """All certificates that apply to the trajectory's mode."""
    certs = [settling_certificate(traj, tol)]
    if traj.mode == "single":
        certs.append(average_conservation_certificate(traj, avg_tol))
        # the derivative bound belongs to the average-preserving law only
        fwat_law = traj.meta.get("law", "fwat") == "fwat"
        report = lyapunov_monitor(traj, graph if fwat_law else None, params if fwat_law else None)
        certs.append(report.certificate())
    elif traj.mode in ("double", "formation"):
        certs.append(tracking_certificate(traj, params.t1, tol))
        if traj.mode == "double":
            certs.append(iss_bound_check(traj, resolve_graph(graph), params))
    return certs
