"""Scenario configs, built-in scenarios and the run/verify/sweep machinery behind the CLI.

A scenario is a nested mapping (a TOML file on disk) with these tables::

    name = "demo"
    mode = "single"            # single, single_switching, double, formation,
                               # pure_tracking, pal_comparison
    seed = 0
    [params]     eta, eta2, t0, t1, tf
    [graph]      family = "ring"/"path"/"complete", n = 4
                 or n = 4, edges = [[1, 2], ...]  or  file = "g.txt"
    [schedule]   builtin = "fig1a" | topologies = [{n=.., edges=..}, ...] | files = [...]
                 period = 0.5  or  times = [...], indices = [...]  or  file = "s.txt"
                 dwell = 0.25, holidays = [...]
    [init]       x = [...] or x_range = [lo, hi]; v / v_range; z0 / z0_range;
                 positions = [[x, y], ...] or position_range; theta; offset; fleet_file
    [formation]  side = 1.0 or spec_file = "spec.txt"
    [integrator] any IntegratorConfig field
    [analysis]   tol = 1e-3, avg_tol = 1e-8

Random initial values are drawn from ``numpy.random.default_rng(seed)`` in
the fixed order x, v, z0, positions, so a config plus its seed pins the run.
"""

from __future__ import annotations

import copy
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .analysis import Certificate, certify, tracking_certificate
from .formation import FormationSpec, UnicycleState, integrate_formation, read_fleet, read_formation_spec, square_spec
from .graph import (
    SwitchingSchedule,
    Topology,
    build_laplacian,
    complete_graph,
    fig1a_graphs,
    min_lambda2,
    path_graph,
    periodic_schedule,
    read_edge_list,
    read_schedule,
    ring_graph,
)
from .protocol import FwatParams, SecondOrderState
from .sim import (
    IntegratorConfig,
    Trajectory,
    consensus_delta,
    integrate_double,
    integrate_pure_tracking,
    integrate_single,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "MODES",
    "BUILTINS",
    "ConfigError",
    "ScenarioConfig",
    "load_config",
    "builtin_config",
    "RunResult",
    "run_scenario",
    "write_artifacts",
    "verify_artifacts",
    "run_sweep",
    "apply_overrides",
    "parse_config",
]

MODES = ("single", "single_switching", "double", "formation", "pure_tracking", "pal_comparison")


class ConfigError(ValueError):
    """The scenario description is incomplete or inconsistent."""


# ---------------------------------------------------------------------------
# built-in scenarios

_FIG4_THETA = [0.0, np.pi / 2, np.pi / 3, np.pi / 6]

BUILTINS: dict[str, dict[str, Any]] = {
    "example1": {
        "description": "4 agents, three switching path graphs, 0.5 s dwell, eta = 4, tf = 4 s",
        "mode": "single_switching",
        "seed": 0,
        "params": {"eta": 4.0, "t0": 0.0, "tf": 4.0},
        "schedule": {"builtin": "fig1a", "period": 0.5},
        "init": {"x_range": [0.0, 1.0]},
        "integrator": {"eps_guard": 1e-3},
    },
    "example2": {
        "description": "double integrators on ring-4, eta = eta2 = 2, t1 = 3 s, tf = 6 s",
        "mode": "double",
        "seed": 0,
        "params": {"eta": 2.0, "eta2": 2.0, "t0": 0.0, "t1": 3.0, "tf": 6.0},
        "graph": {"family": "ring", "n": 4},
        "init": {"x_range": [0.0, 1.0], "v_range": [0.0, 0.5]},
        "integrator": {"eps_guard": 1e-3},
    },
    "formation": {
        "description": "4 unicycles into a unit square on ring-4, eta = eta2 = 2, t1 = 4 s, tf = 8 s",
        "mode": "formation",
        "seed": 0,
        "params": {"eta": 2.0, "eta2": 2.0, "t0": 0.0, "t1": 4.0, "tf": 8.0},
        "graph": {"family": "ring", "n": 4},
        "formation": {"side": 1.0},
        "init": {"position_range": [0.0, 3.0], "theta": _FIG4_THETA, "offset": 0.2},
        "integrator": {"eps_guard": 1e-3},
        "analysis": {"tol": 1e-2},
    },
    "pal_comparison": {
        "description": "average drift of the non-conservative law vs the FwAT law on the example1 schedule",
        "mode": "pal_comparison",
        "seed": 0,
        "params": {"eta": 4.0, "t0": 0.0, "tf": 4.0},
        "schedule": {"builtin": "fig1a", "period": 0.5},
        "init": {"x_range": [0.0, 1.0]},
    },
    "pure_tracking": {
        "description": "isolated tracking error with eta2 = 2 on [0, 3]",
        "mode": "pure_tracking",
        "seed": 0,
        "params": {"eta2": 2.0, "t0": 0.0, "t1": 3.0},
        "init": {"z0_range": [-2.0, 2.0], "n": 4},
    },
    "ring8": {
        "description": "single integrators on ring-8, eta = 4, tf = 2 s",
        "mode": "single",
        "seed": 0,
        "params": {"eta": 4.0, "t0": 0.0, "tf": 2.0},
        "graph": {"family": "ring", "n": 8},
        "init": {"x_range": [-1.0, 1.0]},
    },
}


def builtin_config(name: str) -> dict[str, Any]:
    if name not in BUILTINS:
        raise ConfigError(f"unknown builtin {name!r}; choose from {', '.join(BUILTINS)}")
    raw = copy.deepcopy(BUILTINS[name])
    raw.pop("description", None)
    raw["name"] = name
    return raw


# ---------------------------------------------------------------------------
# config parsing


@dataclass
class ScenarioConfig:
    """Validated scenario.  ``raw`` is the mapping it came from, echoed into sidecars."""

    name: str
    mode: str
    seed: int
    params: FwatParams | None
    eta2: float | None
    graph: Any
    topology: Topology | None
    integrator: IntegratorConfig
    tol: float
    avg_tol: float
    raw: dict[str, Any]
    base_dir: Path


def _table(raw: dict, key: str) -> dict:
    val = raw.get(key, {})
    if not isinstance(val, dict):
        raise ConfigError(f"[{key}] must be a table")
    return val


def _path(base: Path, value: str) -> Path:
    p = Path(value)
    p = p if p.is_absolute() else base / p
    if not p.exists():
        raise ConfigError(f"referenced file {value!r} does not exist")
    return p


def _topology(spec: dict, base: Path) -> Topology:
    try:
        if "file" in spec:
            return read_edge_list(_path(base, spec["file"]))
        if "family" in spec:
            families = {"ring": ring_graph, "path": path_graph, "complete": complete_graph}
            if spec["family"] not in families:
                raise ConfigError(f"unknown graph family {spec['family']!r}")
            return families[spec["family"]](int(spec["n"]))
        if "edges" in spec:
            return Topology(int(spec["n"]), [tuple(e) for e in spec["edges"]])
    except KeyError as exc:
        raise ConfigError(f"graph definition is missing {exc}") from None
    raise ConfigError("graph needs 'file', 'family' or 'edges'")


def _schedule(spec: dict, params: FwatParams, base: Path) -> SwitchingSchedule:
    if spec.get("builtin") == "fig1a":
        tops = fig1a_graphs()
    elif "topologies" in spec:
        tops = tuple(_topology(t, base) for t in spec["topologies"])
    elif "files" in spec:
        tops = tuple(read_edge_list(_path(base, f)) for f in spec["files"])
    else:
        raise ConfigError("[schedule] needs 'builtin', 'topologies' or 'files'")
    holidays = spec.get("holidays", ())
    if "file" in spec:
        return read_schedule(_path(base, spec["file"]), tops, holidays)
    if "period" in spec:
        sched = periodic_schedule(tops, float(spec["period"]), params.t0, params.tf, spec.get("dwell"))
        if holidays:
            sched = SwitchingSchedule(sched.topologies, sched.switch_times, sched.indices, sched.min_dwell,
                                      frozenset(holidays))
        return sched
    if "times" in spec and "indices" in spec and "dwell" in spec:
        return SwitchingSchedule(tops, tuple(spec["times"]), tuple(spec["indices"]), float(spec["dwell"]),
                                 frozenset(holidays))
    raise ConfigError("[schedule] needs 'file', 'period', or 'times' + 'indices' + 'dwell'")


def parse_config(raw: dict[str, Any], base_dir: str | Path = ".") -> ScenarioConfig:
    """Validate a scenario mapping and build its graph, parameters and integrator settings."""
    base = Path(base_dir)
    raw = copy.deepcopy(raw)
    mode = raw.get("mode")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    p = _table(raw, "params")
    try:
        integ = IntegratorConfig(**_table(raw, "integrator"))
    except TypeError as exc:
        raise ConfigError(f"[integrator]: {exc}") from None

    try:
        if mode == "pure_tracking":
            for k in ("eta2", "t0", "t1"):
                if k not in p:
                    raise ConfigError(f"[params] is missing {k!r}")
            if not float(p["t0"]) < float(p["t1"]):
                raise ConfigError("need t0 < t1")
            params, eta2 = None, float(p["eta2"])
        else:
            for k in ("eta", "t0", "tf"):
                if k not in p:
                    raise ConfigError(f"[params] is missing {k!r}")
            if mode in ("double", "formation"):
                for k in ("eta2", "t1"):
                    if k not in p:
                        raise ConfigError(f"[params] is missing {k!r} for mode {mode!r}")
            params = FwatParams(**{k: float(v) for k, v in p.items()})
            eta2 = params.eta2
    except TypeError as exc:
        raise ConfigError(f"[params]: {exc}") from None

    graph, topology = None, None
    if mode in ("single_switching", "pal_comparison") and "schedule" in raw:
        graph = _schedule(_table(raw, "schedule"), params, base)
    elif mode in ("single", "single_switching", "double", "formation", "pal_comparison"):
        if "graph" not in raw:
            raise ConfigError(f"mode {mode!r} needs a [graph] or [schedule] table")
        topology = _topology(_table(raw, "graph"), base)
        graph = topology
    if mode == "formation" and topology is None:
        raise ConfigError("formation mode needs a fixed [graph]")

    init = _table(raw, "init")
    for key in ("x_range", "v_range", "z0_range", "position_range"):
        if key in init:
            lo, hi = init[key]
            if not lo <= hi:
                raise ConfigError(f"init.{key} must be ordered, got {init[key]}")

    an = _table(raw, "analysis")
    return ScenarioConfig(
        name=str(raw.get("name", "scenario")),
        mode=mode,
        seed=int(raw.get("seed", integ.seed)),
        params=params,
        eta2=eta2,
        graph=graph,
        topology=topology,
        integrator=integ,
        tol=float(an.get("tol", 1e-3)),
        avg_tol=float(an.get("avg_tol", 1e-8)),
        raw=raw,
        base_dir=base,
    )


def load_config(path: str | Path) -> dict[str, Any]:
    """Read a TOML scenario, or a JSON sidecar whose ``config`` entry is re-used."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        if path.suffix == ".json":
            data = json.loads(path.read_text())
            raw = data.get("config", data)
        else:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    raw.setdefault("name", path.stem)
    return raw


def apply_overrides(raw: dict, seed: int | None, guard: float | None) -> dict:
    raw = copy.deepcopy(raw)
    if seed is not None:
        raw["seed"] = int(seed)
    if guard is not None:
        raw.setdefault("integrator", {})["eps_guard"] = float(guard)
    return raw


# ---------------------------------------------------------------------------
# running


def _n_agents(cfg: ScenarioConfig, init: dict) -> int:
    if cfg.graph is not None:
        return cfg.graph.n if isinstance(cfg.graph, (Topology, SwitchingSchedule)) else cfg.graph.entries.shape[0]
    if "n" in init:
        return int(init["n"])
    if "z0" in init:
        return len(init["z0"])
    raise ConfigError("cannot infer the number of agents; set init.n")


def _draw(init: dict, key: str, n: int, rng: np.random.Generator, shape=None) -> np.ndarray | None:
    shape = (n,) if shape is None else shape
    if key in init:
        val = np.asarray(init[key], dtype=float)
        if val.shape != shape:
            raise ConfigError(f"init.{key} must have shape {shape}, got {val.shape}")
        return val
    if f"{key}_range" in init:
        lo, hi = init[f"{key}_range"]
        return rng.uniform(lo, hi, size=shape)
    return None


def initial_values(cfg: ScenarioConfig) -> dict[str, np.ndarray]:
    """Resolve explicit or seeded-random initial values."""
    init = _table(cfg.raw, "init")
    n = _n_agents(cfg, init)
    rng = np.random.default_rng(cfg.seed)
    out: dict[str, np.ndarray] = {}
    if cfg.mode == "pure_tracking":
        z0 = _draw(init, "z0", n, rng)
        if z0 is None:
            raise ConfigError("pure_tracking needs init.z0 or init.z0_range")
        out["z0"] = z0
        return out
    if cfg.mode == "formation":
        if "fleet_file" in init:
            fleet = read_fleet(_path(cfg.base_dir, init["fleet_file"]))
            out["positions"] = np.array([s.p for s in fleet])
            out["theta"] = np.array([s.theta for s in fleet])
            out["offset"] = np.array([s.offset for s in fleet])
            return out
        pos = _draw(init, "position", n, rng, shape=(n, 2))
        if pos is None and "positions" in init:
            pos = np.asarray(init["positions"], dtype=float)
        if pos is None or pos.shape != (n, 2):
            raise ConfigError("formation needs init.positions (n x 2) or init.position_range")
        out["positions"] = pos
        out["theta"] = np.asarray(init.get("theta", np.zeros(n)), dtype=float)
        out["offset"] = np.broadcast_to(np.asarray(init.get("offset", 0.2), dtype=float), (n,)).copy()
        if out["theta"].shape != (n,):
            raise ConfigError("init.theta must have one heading per robot")
        return out
    x0 = _draw(init, "x", n, rng)
    if x0 is None:
        raise ConfigError("init needs x or x_range")
    out["x"] = x0
    if cfg.mode == "double":
        v0 = _draw(init, "v", n, rng)
        out["v"] = np.zeros(n) if v0 is None else v0
    return out


def _formation_spec(cfg: ScenarioConfig) -> FormationSpec:
    fs = _table(cfg.raw, "formation")
    if "spec_file" in fs:
        return read_formation_spec(_path(cfg.base_dir, fs["spec_file"]), cfg.topology.n)
    if cfg.topology.n != 4:
        raise ConfigError("the built-in square spec needs 4 robots; give formation.spec_file")
    return square_spec(float(fs.get("side", 1.0)))


@dataclass
class RunResult:
    """Trajectories, certificates and summary of one scenario run."""

    config: ScenarioConfig
    trajectories: dict[str, Trajectory]
    certificates: dict[str, list[Certificate]]
    summary: dict[str, Any]
    init: dict[str, np.ndarray]
    runtime: float

    @property
    def passed(self) -> bool:
        return all(c.achieved for certs in self.certificates.values() for c in certs)


def _pure_tracking_certificates(traj: Trajectory, cfg: ScenarioConfig) -> tuple[list[Certificate], dict]:
    p = _table(cfg.raw, "params")
    t0, t1 = float(p["t0"]), float(p["t1"])
    z0 = traj.x[0]
    c = np.expm1(z0) / (t1 - t0) ** cfg.eta2
    exact = np.log1p(c[None, :] * (t1 - traj.times[:, None]) ** cfg.eta2)
    closed_err = float(np.max(np.abs(traj.x - exact)))
    return [tracking_certificate(traj, t1, cfg.tol)], {"closed_form_max_error": closed_err}


def certify_run(traj: Trajectory, cfg: ScenarioConfig, tol: float | None = None) -> tuple[list[Certificate], dict]:
    tol = cfg.tol if tol is None else tol
    if traj.mode == "pure_tracking":
        return _pure_tracking_certificates(traj, cfg)
    extra = {}
    if traj.mode == "formation":
        extra["final_disp_err"] = float(traj.extras["disp_err"][-1])
    return certify(traj, cfg.graph, cfg.params, tol, cfg.avg_tol), extra


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    """Integrate a validated scenario and certify the result."""
    init = initial_values(cfg)
    integ = cfg.integrator
    start = time.perf_counter()
    trajs: dict[str, Trajectory] = {}
    if cfg.mode in ("single", "single_switching"):
        trajs[cfg.name] = integrate_single(init["x"], cfg.graph, cfg.params, integ)
    elif cfg.mode == "pal_comparison":
        trajs[cfg.name] = integrate_single(init["x"], cfg.graph, cfg.params, integ, law="pal")
        trajs[f"{cfg.name}_fwat"] = integrate_single(init["x"], cfg.graph, cfg.params, integ)
    elif cfg.mode == "double":
        trajs[cfg.name] = integrate_double(SecondOrderState(init["x"], init["v"]), cfg.graph, cfg.params, integ)
    elif cfg.mode == "formation":
        fleet = [UnicycleState(p=pos, theta=th, offset=off)
                 for pos, th, off in zip(init["positions"], init["theta"], init["offset"])]
        trajs[cfg.name] = integrate_formation(fleet, _formation_spec(cfg), cfg.topology, cfg.params, integ)
    elif cfg.mode == "pure_tracking":
        p = _table(cfg.raw, "params")
        trajs[cfg.name] = integrate_pure_tracking(init["z0"], cfg.eta2, float(p["t0"]), float(p["t1"]), integ)
    runtime = time.perf_counter() - start

    certs, summary = {}, {}
    for key, traj in trajs.items():
        certs[key], extra = certify_run(traj, cfg)
        summary[key] = {
            "final_time": float(traj.times[-1]),
            "final_consensus_error": None if traj.mode == "pure_tracking"
            else float(np.max(np.abs(consensus_delta(traj.x[-1], traj.dim)))),
            "max_avg_drift": float(traj.avg_drift.max()),
            "sat_total": int(traj.sat_count.sum()),
            "samples": int(traj.times.size),
            **extra,
        }
    return RunResult(cfg, trajs, certs, summary, init, runtime)


def _gain_record(cfg: ScenarioConfig) -> dict[str, Any]:
    if cfg.mode == "pure_tracking":
        return {"lambda2": None, "threshold": None, "satisfied": bool(cfg.eta2 > 1)}
    g = cfg.graph
    if isinstance(g, SwitchingSchedule):
        lam2 = min_lambda2(g)
    else:
        lam2 = build_laplacian(g).lambda2
    double = cfg.mode in ("double", "formation")
    return {
        "lambda2": lam2,
        "threshold": None if lam2 <= 0 else 1.0 / lam2**2,
        "satisfied": cfg.params.gain_condition(lam2, double=double),
    }


def _plot_script(result: RunResult, csv_names: list[str]) -> str:
    mode = result.config.mode
    lines = [
        "# Plots the stored trajectories; needs matplotlib.",
        "import csv",
        "import sys",
        "from pathlib import Path",
        "",
        "import matplotlib.pyplot as plt",
        "",
        "here = Path(__file__).resolve().parent",
        "",
        "",
        "def load(name):",
        "    with open(here / name) as fh:",
        "        rows = list(csv.reader(fh))",
        "    head = rows[0]",
        "    cols = list(zip(*[[float(v) for v in r] for r in rows[1:]]))",
        "    return dict(zip(head, cols))",
        "",
        "",
        "def series(d, prefix):",
        "    keys = [k for k in d if k.startswith(prefix) and k[len(prefix):].isdigit()]",
        "    return [d[k] for k in keys]",
        "",
        "",
    ]
    for name in csv_names:
        stem = Path(name).stem
        lines.append(f"d = load({name!r})")
        if mode == "formation":
            lines += [
                "fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4.5))",
                "for hx, hy in zip(series(d, 'hx_'), series(d, 'hy_')):",
                "    ax1.plot(hx, hy)",
                "    ax1.plot(hx[0], hy[0], 'o', color='k')",
                "    ax1.plot(hx[-1], hy[-1], 's', color='k')",
                "ax1.set_xlabel('x [m]'); ax1.set_ylabel('y [m]'); ax1.set_aspect('equal'); ax1.set_title('hand paths')",
                "ax2.semilogy(d['t'], [max(e, 1e-16) for e in d['disp_err']])",
                "ax2.set_xlabel('t [s]'); ax2.set_ylabel('total displacement error [m]')",
            ]
        elif mode == "double":
            lines += [
                "fig, axes = plt.subplots(1, 3, figsize=(14, 4))",
                "for xs in series(d, 'x_'):",
                "    axes[0].plot(d['t'], xs)",
                "for vs in series(d, 'v_'):",
                "    axes[1].plot(d['t'], vs)",
                "axes[2].semilogy(d['t'], [max(z, 1e-16) for z in d['z_norm']])",
                "axes[0].set_ylabel('x'); axes[1].set_ylabel('v'); axes[2].set_ylabel('||z||')",
                "for ax in axes:",
                "    ax.set_xlabel('t [s]')",
            ]
        else:
            lines += [
                "fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))",
                "for xs in series(d, 'x_'):",
                "    ax1.plot(d['t'], xs)",
                "ax2.semilogy(d['t'], [max(v, 1e-32) for v in d['V']])",
                "ax1.set_xlabel('t [s]'); ax1.set_ylabel('state')",
                "ax2.set_xlabel('t [s]'); ax2.set_ylabel('V')",
            ]
        lines += [
            f"fig.suptitle({stem!r})",
            "fig.tight_layout()",
            f"fig.savefig(here / {stem + '.png'!r}, dpi=150)",
            "",
        ]
    lines.append("if '--show' in sys.argv:\n    plt.show()")
    return "\n".join(lines) + "\n"


def write_artifacts(result: RunResult, out_dir: str | Path, emit_plots: bool = False) -> dict[str, Path]:
    """Write one CSV per trajectory, the JSON sidecar and optionally a plot script."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    written: dict[str, Path] = {}
    traj_index = {}
    for key, traj in result.trajectories.items():
        path = out / f"{key}.csv"
        traj.to_csv(path)
        written[key] = path
        traj_index[path.name] = {"key": key, "mode": traj.mode, "dim": traj.dim,
                                 "law": traj.meta.get("law"), "meta": traj.meta}
    raw = copy.deepcopy(cfg.raw)
    raw["seed"] = cfg.seed
    sidecar = {
        "tool": "fwat",
        "version": __version__,
        "scenario": cfg.name,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "config": raw,
        "initial_values": {k: np.asarray(v).tolist() for k, v in result.init.items()},
        "gain_condition": _gain_record(cfg),
        "trajectories": traj_index,
        "certificates": {k: [c.to_dict() for c in v] for k, v in result.certificates.items()},
        "summary": result.summary,
        "passed": result.passed,
        "runtime_s": result.runtime,
    }
    side = out / f"{cfg.name}.json"
    side.write_text(json.dumps(_clean(sidecar), indent=2) + "\n")
    written["sidecar"] = side
    if emit_plots:
        script = out / f"{cfg.name}_plot.py"
        script.write_text(_plot_script(result, [p.name for k, p in written.items() if k != "sidecar"]))
        written["plot_script"] = script
    return written


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def verify_artifacts(csv_path: str | Path, sidecar_path: str | Path,
                     tol: float | None = None) -> list[Certificate]:
    """Re-derive every certificate of a stored trajectory from its CSV and sidecar."""
    csv_path, sidecar_path = Path(csv_path), Path(sidecar_path)
    for p in (csv_path, sidecar_path):
        if not p.exists():
            raise ConfigError(f"{p} does not exist")
    try:
        side = json.loads(sidecar_path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{sidecar_path}: {exc}") from None
    entry = side.get("trajectories", {}).get(csv_path.name)
    if entry is None:
        raise ConfigError(f"{csv_path.name} is not listed in {sidecar_path.name}")
    cfg = parse_config(side["config"], sidecar_path.parent)
    try:
        traj = Trajectory.from_csv(csv_path, mode=entry["mode"], dim=int(entry["dim"]))
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{csv_path}: {exc}") from None
    traj.meta.update(entry.get("meta") or {})
    certs, _ = certify_run(traj, cfg, tol)
    return certs


# ---------------------------------------------------------------------------
# sweeps

SWEEP_KEYS = ("eta", "eta2", "tf")


def _cell_config(base: dict, overrides: dict[str, float], seed: int) -> dict:
    raw = copy.deepcopy(base)
    raw["seed"] = seed
    p = raw.setdefault("params", {})
    if "tf" in overrides and "t1" in p:
        # keep the handoff at the same fraction of the horizon
        frac = (p["t1"] - p["t0"]) / (p["tf"] - p["t0"])
        p["t1"] = p["t0"] + frac * (overrides["tf"] - p["t0"])
    p.update(overrides)
    return raw


def _run_cell(args) -> dict[str, Any]:
    index, raw, base_dir, overrides, seed = args
    import warnings

    row: dict[str, Any] = {"cell": index, **{k: overrides.get(k) for k in SWEEP_KEYS}, "seed": seed}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            cfg = parse_config(raw, base_dir)
            result = run_scenario(cfg)
        except Exception as exc:  # recorded per cell, the batch keeps going
            row.update(status="error", error=f"{type(exc).__name__}: {exc}")
            return row
    consensus = result.certificates[cfg.name][0]
    traj = result.trajectories[cfg.name]
    row.update(
        status="ok",
        gain_condition=_gain_record(cfg)["satisfied"],
        gain_warning=any("gain condition" in str(w.message) or "does not exceed" in str(w.message) for w in caught),
        achieved=consensus.achieved,
        achieved_time=consensus.achieved_time,
        final_error=consensus.details.get("final_error", consensus.witness_value),
        eta=cfg.params.eta if cfg.params else None,
        eta2=cfg.eta2,
        tf=cfg.params.tf if cfg.params else None,
        sat_total=int(traj.sat_count.sum()),
        all_certificates=result.passed,
        error="",
    )
    return row


def run_sweep(base: dict, grid: dict[str, list[float]], seeds: list[int], base_dir: str | Path = ".",
              jobs: int = 1) -> list[dict[str, Any]]:
    """Run every (grid cell, seed) combination; failures become rows with ``status = error``."""
    for k in grid:
        if k not in SWEEP_KEYS:
            raise ConfigError(f"cannot sweep {k!r}; choose from {SWEEP_KEYS}")
    keys = list(grid)
    tasks = []
    for values in product(*(grid[k] for k in keys)):
        over = dict(zip(keys, (float(v) for v in values)))
        for seed in seeds:
            tasks.append((len(tasks), _cell_config(base, over, seed), str(base_dir), over, seed))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell, tasks))
    else:
        rows = [_run_cell(t) for t in tasks]
    return sorted(rows, key=lambda r: r["cell"])


SWEEP_COLUMNS = ["cell", "eta", "eta2", "tf", "seed", "status", "gain_condition", "gain_warning", "achieved",
                 "achieved_time", "final_error", "sat_total", "all_certificates", "error"]


def write_sweep_csv(rows: list[dict[str, Any]], path: str | Path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in SWEEP_COLUMNS})


def default_out_dir(flag: str | None) -> Path:
    return Path(flag or os.environ.get("FWAT_OUT_DIR") or "fwat_out")

