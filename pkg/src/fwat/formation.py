"""Planar formation control of unicycle robots through their hand positions.

Each robot's hand point ``h_i = p_i + L_i [cos th_i, sin th_i]`` obeys
``h_i'' = M(th_i) [v_i', w_i'] + g_i``, so choosing
``[v_i', w_i'] = M^{-1} (u_i - g_i)`` turns the hands into double integrators
and the FwAT double-integrator law runs on the stacked error ``h - h*`` with
``L kron I2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graph import LaplacianMatrix, Topology, build_laplacian
from .protocol import FwatParams, Saturation, _double_law, capped_exp, check_gain_condition
from .sim import IntegratorConfig, Trajectory, consensus_delta, double_segments, integrate_segments

__all__ = [
    "DEFAULT_HAND_OFFSET",
    "UnicycleState",
    "FormationSpec",
    "hand_position",
    "hand_velocity",
    "hand_acceleration",
    "coriolis_term",
    "feedback_linearize",
    "formation_input",
    "displacement_error",
    "integrate_formation",
    "square_spec",
    "read_formation_spec",
    "read_fleet",
]

DEFAULT_HAND_OFFSET = 0.2


@dataclass(frozen=True)
class UnicycleState:
    """Pose, twist and hand offset of one robot (SI units, radians)."""

    p: np.ndarray
    theta: float
    v: float = 0.0
    omega: float = 0.0
    offset: float = DEFAULT_HAND_OFFSET

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.shape != (2,):
            raise ValueError("p must be a 2-vector")
        object.__setattr__(self, "p", p)
        if not self.offset > 0:
            raise ValueError(f"hand offset must be positive, got {self.offset}")
        if not np.all(np.isfinite([*p, self.theta, self.v, self.omega, self.offset])):
            raise ValueError("unicycle state has non-finite entries")


# ---------------------------------------------------------------------------
# kinematics, vectorized over robots


def _hands(px, py, th, off):
    return np.stack([px + off * np.cos(th), py + off * np.sin(th)], axis=-1)


def _hand_vel(th, v, w, off):
    c, s = np.cos(th), np.sin(th)
    return np.stack([c * v - s * off * w, s * v + c * off * w], axis=-1)


def _coriolis(th, v, w, off):
    c, s = np.cos(th), np.sin(th)
    return np.stack([-s * v * w - off * c * w * w, c * v * w - off * s * w * w], axis=-1)


def _linearize(u, th, v, w, off):
    c, s = np.cos(th), np.sin(th)
    du = u - _coriolis(th, v, w, off)
    vdot = c * du[..., 0] + s * du[..., 1]
    wdot = (-s * du[..., 0] + c * du[..., 1]) / off
    return vdot, wdot


def hand_position(s: UnicycleState) -> np.ndarray:
    return _hands(s.p[0], s.p[1], s.theta, s.offset)


def hand_velocity(s: UnicycleState) -> np.ndarray:
    return _hand_vel(s.theta, s.v, s.omega, s.offset)


def coriolis_term(s: UnicycleState) -> np.ndarray:
    """Velocity-dependent part of the hand acceleration."""
    return _coriolis(s.theta, s.v, s.omega, s.offset)


def hand_acceleration(s: UnicycleState, v_dot: float, omega_dot: float) -> np.ndarray:
    """Forward map from ``(v', w')`` to the hand acceleration."""
    c, sn = np.cos(s.theta), np.sin(s.theta)
    m = np.array([[c, -s.offset * sn], [sn, s.offset * c]])
    return m @ np.array([v_dot, omega_dot]) + coriolis_term(s)


def feedback_linearize(u_hand, s: UnicycleState) -> tuple[float, float]:
    """``(v', w')`` that make the hand acceleration equal ``u_hand``."""
    if not s.offset > 0:
        raise ValueError("feedback linearization needs a positive hand offset")
    vdot, wdot = _linearize(np.asarray(u_hand, dtype=float), s.theta, s.v, s.omega, s.offset)
    return float(vdot), float(wdot)


# ---------------------------------------------------------------------------
# formation specification


class FormationSpec:
    """Desired relative hand displacements ``h*_j - h*_i`` keyed by node pair.

    Either orientation of a pair may be given; the reverse is implied by
    antisymmetry.  Construction fails if the displacements are not consistent
    with a single target configuration (every cycle must sum to zero).
    """

    def __init__(self, n: int, displacements: Mapping[tuple[int, int], Sequence[float]], tol: float = 1e-12):
        self.n = int(n)
        self._disp: dict[tuple[int, int], np.ndarray] = {}
        for (i, j), d in displacements.items():
            i, j = int(i), int(j)
            if i == j or not (1 <= i <= n and 1 <= j <= n):
                raise ValueError(f"bad displacement pair ({i}, {j})")
            d = np.asarray(d, dtype=float)
            if d.shape != (2,):
                raise ValueError(f"displacement for ({i}, {j}) must be a 2-vector")
            if (i, j) in self._disp or (j, i) in self._disp:
                raise ValueError(f"pair ({i}, {j}) given twice")
            self._disp[(i, j)] = d
        self.targets = self._solve_targets(tol)

    def _solve_targets(self, tol: float) -> np.ndarray:
        adj: dict[int, list[tuple[int, np.ndarray]]] = {k: [] for k in range(1, self.n + 1)}
        for (i, j), d in self._disp.items():
            adj[i].append((j, d))
            adj[j].append((i, -d))
        pos: dict[int, np.ndarray] = {}
        for root in range(1, self.n + 1):
            if root in pos:
                continue
            pos[root] = np.zeros(2)
            stack = [root]
            while stack:
                i = stack.pop()
                for j, d in adj[i]:
                    if j not in pos:
                        pos[j] = pos[i] + d
                        stack.append(j)
        for (i, j), d in self._disp.items():
            if np.max(np.abs(pos[j] - pos[i] - d)) > tol:
                raise ValueError(f"displacements are not cycle-consistent at pair ({i}, {j})")
        return np.array([pos[k] for k in range(1, self.n + 1)])

    def displacement(self, i: int, j: int) -> np.ndarray:
        """``h*_j - h*_i`` for any node pair."""
        return self.targets[j - 1] - self.targets[i - 1]

    def check_edges(self, topology: Topology) -> None:
        """Every graph edge must carry a displacement in some orientation."""
        if topology.n != self.n:
            raise ValueError("spec and graph disagree on the node count")
        for i, j in topology.edges:
            if (i, j) not in self._disp and (j, i) not in self._disp:
                raise ValueError(f"no desired displacement for edge ({i}, {j})")

    def items(self):
        return self._disp.items()


def square_spec(side: float = 1.0) -> FormationSpec:
    """Unit-square spec on the 4-ring: 1 top-left, 2 top-right, 3 bottom-right, 4 bottom-left."""
    ex, ey = [side, 0.0], [0.0, side]
    return FormationSpec(4, {(1, 2): ex, (4, 3): ex, (4, 1): ey, (3, 2): ey})


def read_formation_spec(path: str | Path, n: int) -> FormationSpec:
    """Parse ``i j dx dy`` lines (meters)."""
    disp = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        if len(line) != 4:
            raise ValueError(f"{path}: bad spec line {raw!r}")
        disp[(int(line[0]), int(line[1]))] = (float(line[2]), float(line[3]))
    return FormationSpec(n, disp)


def read_fleet(path: str | Path) -> list[UnicycleState]:
    """Parse ``x y theta L`` lines; robots start at rest."""
    fleet = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        if len(line) != 4:
            raise ValueError(f"{path}: bad fleet line {raw!r}")
        x, y, th, off = (float(v) for v in line)
        fleet.append(UnicycleState(p=np.array([x, y]), theta=th, offset=off))
    return fleet


# ---------------------------------------------------------------------------
# control and simulation


def _kron2(L) -> np.ndarray:
    Lm = L.entries if isinstance(L, LaplacianMatrix) else np.asarray(L, dtype=float)
    return np.kron(Lm, np.eye(2))


def _unpack(fleet: Sequence[UnicycleState]):
    px = np.array([s.p[0] for s in fleet])
    py = np.array([s.p[1] for s in fleet])
    th = np.array([s.theta for s in fleet])
    v = np.array([s.v for s in fleet])
    w = np.array([s.omega for s in fleet])
    off = np.array([s.offset for s in fleet])
    return px, py, th, v, w, off


def formation_input(
    fleet: Sequence[UnicycleState],
    spec: FormationSpec,
    L,
    params: FwatParams,
    t: float,
    sat: Saturation | None = None,
) -> np.ndarray:
    """Stacked hand-acceleration command ``[u_1x, u_1y, u_2x, ...]``.

    Pass each 2-block through :func:`feedback_linearize` to get wheel-level
    ``(v', w')`` commands.
    """
    params.require_double()
    if t < params.t0:
        raise ValueError(f"t={t} precedes t0={params.t0}")
    px, py, th, v, w, off = _unpack(fleet)
    err = (_hands(px, py, th, off) - spec.targets).ravel()
    hdot = _hand_vel(th, v, w, off).ravel()
    return _double_law(err, hdot, _kron2(L), params, t, sat)


def displacement_error(hands: np.ndarray, spec: FormationSpec, topology: Topology) -> float:
    """Total edge error ``sum ||h_j - h_i - h*_ij||`` for ``hands`` of shape ``(n, 2)``."""
    return float(sum(np.linalg.norm(hands[j - 1] - hands[i - 1] - spec.displacement(i, j))
                     for i, j in topology.edges))


def integrate_formation(
    fleet0: Sequence[UnicycleState],
    spec: FormationSpec,
    topology: Topology,
    params: FwatParams,
    cfg: IntegratorConfig | None = None,
    landings: Iterable[float] = (),
) -> Trajectory:
    """Simulate unicycle kinematics under the feedback-linearized FwAT formation law.

    The returned trajectory stores hand errors ``h - h*`` as ``x`` (``dim=2``)
    and hand velocities as ``v``.  Extra columns hold robot poses, twists,
    hand positions and the total displacement error ``disp_err``.
    """
    params.require_double()
    cfg = cfg or IntegratorConfig()
    spec.check_edges(topology)
    lap = build_laplacian(topology)
    gain_ok = check_gain_condition(params, lap.lambda2, double=True)
    lbar = LaplacianMatrix(entries=_kron2(lap), lambda2=lap.lambda2)
    eps = cfg.guard(params.t0, params.tf)
    n = len(fleet0)
    if n != spec.n:
        raise ValueError("fleet size does not match the formation spec")
    off = np.array([s.offset for s in fleet0])
    targets = spec.targets
    sat = Saturation()

    def split(y):
        return y[:n], y[n:2 * n], y[2 * n:3 * n], y[3 * n:4 * n], y[4 * n:]

    def hand_law(Lm, correction, t, y, s):
        px, py, th, v, w = split(y)
        err = (_hands(px, py, th, off) - targets).ravel()
        hdot = _hand_vel(th, v, w, off).ravel()
        return _double_law(err, hdot, Lm, params, t, s, correction)

    def make_rhs(Lm, correction, s):
        def rhs(t, y):
            px, py, th, v, w = split(y)
            u = hand_law(Lm, correction, t, y, s).reshape(n, 2)
            vdot, wdot = _linearize(u, th, v, w, off)
            c, sn = np.cos(th), np.sin(th)
            return np.concatenate([c * v, sn * v, w, vdot, wdot])
        return rhs

    def make_output(Lm, correction):
        def output(t, y, s):
            return hand_law(Lm, correction, t, y, s)
        return output

    segments = double_segments(lbar, params, eps, landings, sat, make_rhs, make_output)
    px0, py0, th0, v0, w0, _ = _unpack(fleet0)
    y0 = np.concatenate([px0, py0, th0, v0, w0])
    times, ys, seg_of, stats = integrate_segments(segments, y0, cfg)

    us, sats, errs, hdots, hands_all, z_norm, disp = [], [], [], [], [], [], []
    for t, y, k in zip(times, ys, seg_of):
        s = Saturation()
        us.append(segments[k].output(t, y, s))
        sats.append(s.count)
        px, py, th, v, w = split(y)
        hands = _hands(px, py, th, off)
        err = (hands - targets).ravel()
        hdot = _hand_vel(th, v, w, off).ravel()
        Lm = lbar.entries
        z = hdot - (params.eta / (params.tf - t)) * (Lm @ capped_exp(-(Lm @ err)))
        errs.append(err)
        hdots.append(hdot)
        hands_all.append(hands)
        z_norm.append(np.linalg.norm(z))
        disp.append(displacement_error(hands, spec, topology))

    errs = np.array(errs)
    hands_all = np.array(hands_all)
    delta = consensus_delta(errs, dim=2)
    extras = {}
    for name, block in zip(("px", "py", "theta", "speed", "omega"), split(ys.T)):
        for i in range(n):
            extras[f"{name}_{i + 1}"] = block[i]
    for i in range(n):
        extras[f"hx_{i + 1}"] = hands_all[:, i, 0]
        extras[f"hy_{i + 1}"] = hands_all[:, i, 1]
    extras["disp_err"] = np.array(disp)

    return Trajectory(
        mode="formation",
        times=times,
        x=errs,
        u=np.array(us),
        V=np.sum(delta * delta, axis=1),
        avg=errs.mean(axis=1),
        z_norm=np.array(z_norm),
        sat_count=np.array(sats, dtype=float),
        v=np.array(hdots),
        dim=2,
        extras=extras,
        meta={
            "params": {"eta": params.eta, "eta2": params.eta2, "t0": params.t0, "t1": params.t1, "tf": params.tf},
            "method": cfg.method,
            "rel_tol": cfg.rel_tol,
            "abs_tol": cfg.abs_tol,
            "eps_guard": eps,
            "lambda2": lap.lambda2,
            "gain_condition": gain_ok,
            "sat_total": sat.count,
            "steps": stats.steps,
            "rejected": stats.rejected,
            "rhs_calls": stats.rhs_calls,
            "offsets": off.tolist(),
        },
    )
