"""FwAT control laws as pure functions of state, time and parameters.

Every law accepts the Laplacian either as a :class:`~fwat.graph.LaplacianMatrix`
or as a plain square array (the formation controller passes ``L kron I2``).

Element-wise exponentials saturate their argument at ``+-EXP_CAP``.  Callers
that care how often that happens pass a :class:`Saturation` counter; nothing
is tracked globally.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .graph import LaplacianMatrix

__all__ = [
    "EXP_CAP",
    "Saturation",
    "GainConditionWarning",
    "FwatParams",
    "SecondOrderState",
    "capped_exp",
    "check_gain_condition",
    "phi1",
    "fwat_single_input",
    "pal_input",
    "per_agent_input",
    "tracking_error",
    "phi1_partials",
    "fwat_double_input",
]

EXP_CAP = 500.0


@dataclass
class Saturation:
    """Caller-owned tally of exponent arguments clipped at ``EXP_CAP``."""

    count: int = 0


class GainConditionWarning(UserWarning):
    """The gain condition for guaranteed convergence is not met or cannot be checked."""


@dataclass(frozen=True)
class FwatParams:
    """Gains and time instants of the FwAT laws.

    Attributes:
        eta: consensus gain, must exceed ``1 / lambda2**2`` for the guarantee.
        t0: start time.
        tf: prescribed settling time.
        eta2: tracking gain of the double-integrator law (> 1).
        t1: tracking handoff time, ``t0 < t1 < tf`` (double-integrator only).
    """

    eta: float
    t0: float
    tf: float
    eta2: float | None = None
    t1: float | None = None

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not self.t0 < self.tf:
            raise ValueError(f"need t0 < tf, got t0={self.t0}, tf={self.tf}")
        if self.t1 is not None and not self.t0 < self.t1 < self.tf:
            raise ValueError(f"need t0 < t1 < tf, got t1={self.t1}")
        if self.eta2 is not None and not self.eta2 > 0:
            raise ValueError(f"eta2 must be positive, got {self.eta2}")

    @property
    def is_double(self) -> bool:
        return self.t1 is not None and self.eta2 is not None

    def require_double(self) -> None:
        if not self.is_double:
            raise ValueError("double-integrator law needs eta2 and t1")

    def gain_condition(self, lambda2: float, double: bool = False) -> bool:
        ok = lambda2 > 0 and self.eta > 1.0 / lambda2**2
        if double:
            ok = ok and self.eta2 is not None and self.eta2 > 1.0
        return bool(ok)


def check_gain_condition(params: FwatParams, lambda2: float | None, double: bool = False) -> bool:
    """Return the gain condition and warn when it fails or cannot be checked."""
    if lambda2 is None or lambda2 <= 0:
        warnings.warn("gain condition unverified: lambda2 unknown or zero", GainConditionWarning, stacklevel=2)
        return False
    ok = params.gain_condition(lambda2, double=double)
    if not ok:
        msg = f"eta={params.eta} does not exceed 1/lambda2^2={1.0 / lambda2**2:.6g}"
        if double and not (params.eta2 is not None and params.eta2 > 1):
            msg += f" or eta2={params.eta2} <= 1"
        warnings.warn(msg, GainConditionWarning, stacklevel=2)
    return ok


@dataclass(frozen=True)
class SecondOrderState:
    """Positions and velocities of double-integrator agents."""

    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if x.shape != v.shape or x.ndim != 1:
            raise ValueError("x and v must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise ValueError("state has non-finite entries")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)


def _mat(L) -> np.ndarray:
    if isinstance(L, LaplacianMatrix):
        return L.entries
    return np.asarray(L, dtype=float)


def capped_exp(arg: np.ndarray, sat: Saturation | None = None) -> np.ndarray:
    """``exp`` with the argument clipped to ``[-EXP_CAP, EXP_CAP]``."""
    arg = np.asarray(arg, dtype=float)
    clipped = np.clip(arg, -EXP_CAP, EXP_CAP)
    if sat is not None:
        sat.count += int(np.count_nonzero(clipped != arg))
    return np.exp(clipped)


def _check_time(params: FwatParams, t: float) -> None:
    if t < params.t0:
        raise ValueError(f"t={t} precedes t0={params.t0}")


def phi1(x, L, params: FwatParams, t: float, sat: Saturation | None = None) -> np.ndarray:
    """Desired-velocity field ``-eta/(tf-t) L exp(-L x)``; defined only for ``t < tf``."""
    if t >= params.tf:
        raise ValueError(f"phi1 is singular for t >= tf (t={t}, tf={params.tf})")
    Lm = _mat(L)
    w = capped_exp(-(Lm @ x), sat)
    return -(params.eta / (params.tf - t)) * (Lm @ w)


def fwat_single_input(x, L, params: FwatParams, t: float, sat: Saturation | None = None) -> np.ndarray:
    """Average-preserving FwAT consensus input; zero from ``tf`` on."""
    _check_time(params, t)
    x = np.asarray(x, dtype=float)
    if t >= params.tf:
        return np.zeros_like(x)
    Lm = _mat(L)
    return (params.eta / (params.tf - t)) * (Lm @ capped_exp(-(Lm @ x), sat))


def pal_input(x, L, params: FwatParams, t: float, sat: Saturation | None = None) -> np.ndarray:
    """The earlier law ``-eta/(tf-t) (1 - exp(-L x))``, kept as a comparison baseline.

    Not diffusive in the summed sense: ``1^T u`` is generally nonzero, so the
    state average drifts.  No convergence proof backs it.
    """
    _check_time(params, t)
    x = np.asarray(x, dtype=float)
    if t >= params.tf:
        return np.zeros_like(x)
    Lm = _mat(L)
    return -(params.eta / (params.tf - t)) * (1.0 - capped_exp(-(Lm @ x), sat))


def per_agent_input(
    i: int,
    z_self: float,
    z_neighbors: Mapping[int, float],
    params: FwatParams,
    t: float,
    sat: Saturation | None = None,
) -> float:
    """Input of agent ``i`` from broadcast relative-state sums.

    ``z_self`` is ``sum_{j in N_i} (x_j - x_i)`` and ``z_neighbors`` maps each
    neighbor label ``j`` to its own ``z_j``.  The result equals component
    ``i`` of :func:`fwat_single_input`.
    """
    _check_time(params, t)
    if t >= params.tf or not z_neighbors:
        return 0.0
    zj = np.fromiter(z_neighbors.values(), dtype=float, count=len(z_neighbors))
    e_self = capped_exp(np.array([z_self]), sat)[0]
    e_nb = capped_exp(zj, sat)
    return float(params.eta / (params.tf - t) * np.sum(e_self - e_nb))


def tracking_error(state: SecondOrderState, L, params: FwatParams, t: float) -> np.ndarray:
    """``z = v + phi1(x)``."""
    return state.v + phi1(state.x, L, params, t)


def phi1_partials(x, L, params: FwatParams, t: float, sat: Saturation | None = None):
    """Jacobian ``d phi1/dx`` and time derivative ``d phi1/dt``."""
    if t >= params.tf:
        raise ValueError(f"phi1 is singular for t >= tf (t={t}, tf={params.tf})")
    Lm = _mat(L)
    w = capped_exp(-(Lm @ x), sat)
    gain = params.eta / (params.tf - t)
    jac = gain * (Lm @ (w[:, None] * Lm))
    dt = -(gain / (params.tf - t)) * (Lm @ w)
    return jac, dt


def _double_law(x, v, Lm, params: FwatParams, t: float, sat, correction: bool = True) -> np.ndarray:
    # shared by the public law and the simulators; correction=False drops the
    # t < t1 tracking term
    if t >= params.tf:
        return np.zeros_like(x)
    w = capped_exp(-(Lm @ x), sat)
    gain = params.eta / (params.tf - t)
    Lw = Lm @ w
    # -(dphi/dx) v - dphi/dt, without forming the Jacobian
    u = -gain * (Lm @ (w * (Lm @ v))) + (gain / (params.tf - t)) * Lw
    if correction and t < params.t1:
        z = v - gain * Lw
        u = u - (params.eta2 / (params.t1 - t)) * (1.0 - capped_exp(-z, sat))
    return u


def fwat_double_input(
    state: SecondOrderState, L, params: FwatParams, t: float, sat: Saturation | None = None
) -> np.ndarray:
    """Three-branch FwAT law for double integrators.

    ``[t0, t1)``: track ``-phi1`` plus the finite-time tracking correction;
    ``[t1, tf)``: track ``-phi1`` only; ``t >= tf``: zero.
    """
    params.require_double()
    _check_time(params, t)
    return _double_law(state.x, state.v, _mat(L), params, t, sat)
