"""Command-line front end: ``fwat run | verify | sweep | list-builtins``.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 certificate
failure (``run``/``sweep`` only with ``--strict``; ``verify`` always).
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from .protocol import GainConditionWarning
from .scenarios import (
    BUILTINS,
    ConfigError,
    apply_overrides,
    builtin_config,
    default_out_dir,
    load_config,
    parse_config,
    run_scenario,
    run_sweep,
    verify_artifacts,
    write_artifacts,
    write_sweep_csv,
)
from .sim import NonFiniteStateError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CERT = 0, 2, 3, 4


def _base_config(args) -> tuple[dict, Path]:
    if args.config and args.builtin:
        raise ConfigError("give either a builtin name or --config, not both")
    if args.config:
        return load_config(args.config), Path(args.config).resolve().parent
    if args.builtin:
        return builtin_config(args.builtin), Path.cwd()
    raise ConfigError("need a builtin name or --config PATH")


def _print_certs(label: str, certs) -> None:
    for c in certs:
        status = "PASS" if c.achieved else "FAIL"
        when = "" if c.achieved_time is None else f" at t={c.achieved_time:.6g}"
        print(f"  [{status}] {label} {c.kind}{when}  witness={c.witness_value:.3e} @ t={c.witness_time:.6g}"
              f"  tol={c.tolerance_used:g}")


def cmd_run(args) -> int:
    raw, base = _base_config(args)
    raw = apply_overrides(raw, args.seed, args.guard)
    if args.tol is not None:
        raw.setdefault("analysis", {})["tol"] = args.tol
    cfg = parse_config(raw, base)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", GainConditionWarning)
        try:
            result = run_scenario(cfg)
        finally:
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)
    paths = write_artifacts(result, default_out_dir(args.out), emit_plots=args.emit_plots)
    print(f"{cfg.name} ({cfg.mode}, seed {cfg.seed}) finished in {result.runtime:.2f} s")
    for key, certs in result.certificates.items():
        _print_certs(key, certs)
    for key, p in paths.items():
        print(f"  wrote {p}")
    if args.strict and not result.passed:
        return EXIT_CERT
    return EXIT_OK


def cmd_verify(args) -> int:
    csv_path = Path(args.csv)
    sidecar = Path(args.sidecar) if args.sidecar else None
    if sidecar is None:
        # look for any sidecar in the same directory listing this CSV
        for cand in sorted(csv_path.parent.glob("*.json")):
            try:
                if csv_path.name in json.loads(cand.read_text()).get("trajectories", {}):
                    sidecar = cand
                    break
            except (json.JSONDecodeError, OSError):
                continue
        if sidecar is None:
            raise ConfigError(f"no sidecar found for {csv_path}")
    certs = verify_artifacts(csv_path, sidecar, args.tol)
    _print_certs(csv_path.stem, certs)
    ok = all(c.achieved for c in certs)
    print("all certificates pass" if ok else "certificate failure")
    return EXIT_OK if ok else EXIT_CERT


def _parse_grid(items: list[str]) -> dict[str, list[float]]:
    grid = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"grid entry {item!r} must look like key=v1,v2,...")
        key, vals = item.split("=", 1)
        try:
            grid[key.strip()] = [float(v) for v in vals.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"grid entry {item!r} has non-numeric values") from None
    return grid


def _parse_seeds(text: str) -> list[int]:
    seeds = []
    for part in text.split(","):
        if "-" in part:
            a, b = part.split("-", 1)
            seeds.extend(range(int(a), int(b) + 1))
        elif part.strip():
            seeds.append(int(part))
    return seeds


def cmd_sweep(args) -> int:
    raw, base = _base_config(args)
    raw = apply_overrides(raw, None, args.guard)
    if args.tol is not None:
        raw.setdefault("analysis", {})["tol"] = args.tol
    grid = _parse_grid(args.grid)
    sweep_table = raw.pop("sweep", {})
    for k, v in sweep_table.items():
        if k != "seeds":
            grid.setdefault(k, [float(x) for x in v])
    if args.seeds:
        seeds = _parse_seeds(args.seeds)
    elif "seeds" in sweep_table:
        seeds = [int(s) for s in sweep_table["seeds"]]
    else:
        seeds = [args.seed if args.seed is not None else int(raw.get("seed", 0))]
    parse_config(raw, base)  # fail fast on a broken base config
    rows = run_sweep(raw, grid, seeds, base, jobs=args.jobs)
    out = default_out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{raw.get('name', 'sweep')}_sweep.csv"
    write_sweep_csv(rows, path)
    n_err = sum(r["status"] != "ok" for r in rows)
    n_fail = sum(r["status"] == "ok" and not r["achieved"] for r in rows)
    print(f"{len(rows)} cells, {n_err} errors, {n_fail} without consensus; wrote {path}")
    if n_err and all(r["status"] != "ok" for r in rows):
        return EXIT_NUMERIC
    if args.strict and (n_err or n_fail):
        return EXIT_CERT
    return EXIT_OK


def cmd_list(args) -> int:
    width = max(len(k) for k in BUILTINS)
    for name, spec in BUILTINS.items():
        print(f"{name:<{width}}  {spec['mode']:<16}  {spec['description']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fwat", description="FwAT consensus simulations and certificates")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, runner=True):
        p.add_argument("--out", help="output directory (default $FWAT_OUT_DIR or ./fwat_out)")
        p.add_argument("--tol", type=float, help="consensus/tracking tolerance for certificates")
        p.add_argument("--strict", action="store_true", help="exit 4 when a certificate fails")
        if runner:
            p.add_argument("builtin", nargs="?", help="built-in scenario name")
            p.add_argument("--config", help="scenario TOML file (or a JSON sidecar to re-run)")
            p.add_argument("--seed", type=int, help="override the scenario seed")
            p.add_argument("--guard", type=float, help="eps_guard override")

    p_run = sub.add_parser("run", help="run one scenario")
    common(p_run)
    p_run.add_argument("--emit-plots", action="store_true", help="also write a matplotlib script")
    p_run.set_defaults(func=cmd_run)

    p_ver = sub.add_parser("verify", help="re-check certificates of a stored trajectory")
    p_ver.add_argument("csv")
    p_ver.add_argument("sidecar", nargs="?")
    common(p_ver, runner=False)
    p_ver.set_defaults(func=cmd_verify)

    p_sw = sub.add_parser("sweep", help="batch-run a parameter grid")
    common(p_sw)
    p_sw.add_argument("--grid", action="append", help="key=v1,v2,... over eta, eta2, tf (repeatable)")
    p_sw.add_argument("--seeds", help="seed list such as 0-19 or 1,5,9")
    p_sw.add_argument("--jobs", type=int, default=1, help="worker processes")
    p_sw.set_defaults(func=cmd_sweep)

    p_ls = sub.add_parser("list-builtins", help="list built-in scenarios")
    p_ls.set_defaults(func=cmd_list)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonFiniteStateError, FloatingPointError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, TypeError, KeyError) as exc:
        # constructor validation (bad params, disconnected graph, ...) is a config problem
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
