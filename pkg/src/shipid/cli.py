"""Batch command-line front end.

Subcommands: generate | estimate | validate | simulate. Angles are degrees
on the command line and inside scenario files; every data file (CSV, result
JSON) uses radians. Exit codes: 0 success, 1 runtime or write failure,
2 usage/validation failure (including missing input files).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import dataio, estimation, synthgen, validation
from .actuation import thruster_from_dict
from .errors import ParseError, ShipIdError
from .model import simulate
from .params import (REFERENCE_TUG_HULL, HullSpecs, ShipParams6, ShipParams22,
                     load_params22)
from .solver import SolveOptions

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class UsageError(ShipIdError):
    """Bad invocation or invalid/missing inputs (exit code 2)."""


def _load_json(path, what):
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} file not found: {path}")
    try:
        with open(p, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} file {path} is not valid JSON: {exc}") from exc


def _load_params(path) -> ShipParams22:
    if not Path(path).exists():
        raise UsageError(f"params file not found: {path}")
    try:
        return load_params22(path)
    except ShipIdError as exc:
        raise UsageError(str(exc)) from exc


def _load_thruster(path):
    if path is None:
        return None
    return thruster_from_dict(_load_json(path, "thruster"))


def _global_config(args) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        cfg = _load_json(args.config, "config")
        if not isinstance(cfg, dict):
            raise UsageError(f"config file {args.config} must hold a JSON object")
    return cfg


def _estimation_config(cfg: dict, args) -> estimation.EstimationConfig:
    est = dict(cfg.get("estimation", {}))
    solver = SolveOptions.from_dict(cfg.get("solver", {}))
    if getattr(args, "paper_literal_constraints", False):
        est["constraint_mode"] = "paper-literal"
    if getattr(args, "mode", None):
        est["mode"] = args.mode
    allowed = {"lam", "bound", "mass_floor", "constraint_mode", "mode", "weights"}
    unknown = set(est) - allowed
    if unknown:
        raise UsageError(f"unknown estimation config keys: {sorted(unknown)}")
    try:
        return estimation.EstimationConfig(solver=solver, **est)
    except ShipIdError as exc:
        raise UsageError(str(exc)) from exc


def cmd_generate(args) -> int:
    cfg = _global_config(args)
    params = (_load_params(args.params) if args.params
              else None)
    thr = _load_thruster(args.thruster)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))

    scenario_path = args.scenario or cfg.get("scenario")
    if scenario_path:
        if not Path(scenario_path).exists():
            raise UsageError(f"scenario file not found: {scenario_path}")
        plans, noise = synthgen.load_scenario(scenario_path)
    else:
        plans = synthgen.standard_12_plans(dt=float(cfg.get("dt", 0.2)))
        noise = synthgen.NoiseSpec()
    if args.seed is not None or "seed" in cfg:
        noise = synthgen.NoiseSpec(pose_std=noise.pose_std,
                                   vel_std=noise.vel_std, seed=seed)

    from .params import REFERENCE_TUG_PARAMS
    dataset = synthgen.generate_scenario(plans, params or REFERENCE_TUG_PARAMS,
                                         thr=thr, noise=noise)
    manifest = dataio.save_dataset(dataset, args.out)
    print(f"wrote {len(dataset)} maneuvers ({dataset.sample_count} samples) "
          f"and manifest {manifest}")
    return EXIT_OK


def _initial_guess(args, cfg):
    if args.init_params:
        return _load_params(args.init_params), {"init": "file", "path": args.init_params}
    specs = REFERENCE_TUG_HULL
    source = "built-in reference hull"
    if args.specs:
        raw = _load_json(args.specs, "hull specs")
        try:
            specs = HullSpecs(**raw)
        except (TypeError, ShipIdError) as exc:
            raise UsageError(f"invalid hull specs: {exc}") from exc
        source = args.specs
    added = estimation.empirical_added_mass(specs)
    p0 = estimation.init_params_empirical(specs)
    info = {"init": "empirical", "specs": source,
            "added_mass": {k: float(v) for k, v in added.items()},
            "inertia_diagonal": [p0.m11, p0.m22, p0.m33]}
    return p0, info


def cmd_estimate(args) -> int:
    cfg = _global_config(args)
    if not Path(args.manifest).exists():
        raise UsageError(f"manifest not found: {args.manifest}")
    try:
        dataset = dataio.load_dataset(args.manifest)
    except ParseError as exc:
        raise UsageError(str(exc)) from exc
    dataset = dataset.with_derived_velocities()
    config = _estimation_config(cfg, args)
    if args.thruster:
        config.thruster = _load_thruster(args.thruster)
    p0, init_info = _initial_guess(args, cfg)

    if config.mode == "lo":
        result = estimation.estimate_lo(dataset, p0, config)
    elif config.mode == "go":
        result = estimation.estimate_go(dataset, p0, config)
    else:
        result = estimation.estimate_combined(dataset, p0, config)

    payload = result.to_dict(include_trace=args.trace)
    payload["initialization"] = init_info
    payload["mode"] = config.mode
    payload["constraint_mode"] = config.constraint_mode
    dataio.export_report_json(payload, args.out)
    flag = " (degraded)" if result.degraded else ""
    print(f"estimation finished{flag}; result written to {args.out}")
    if result.degraded:
        print("warning: global fit failed at the final stage; "
              "result carries the local fit", file=sys.stderr)
    return EXIT_OK


def _params_from_result_file(path) -> ShipParams22:
    data = _load_json(path, "params")
    if isinstance(data, dict) and ("p_go" in data or "p_lo" in data):
        chosen = data.get("p_go") or data.get("p_lo")
        if chosen is None:
            raise UsageError(f"{path}: estimation result carries no parameters")
        return ShipParams22.from_dict(chosen)
    if isinstance(data, dict):
        return ShipParams22.from_dict(data)
    return ShipParams22.from_array(np.asarray(data, dtype=float))


def cmd_validate(args) -> int:
    cfg = _global_config(args)
    if not Path(args.manifest).exists():
        raise UsageError(f"manifest not found: {args.manifest}")
    try:
        dataset = dataio.load_dataset(args.manifest)
    except ParseError as exc:
        raise UsageError(str(exc)) from exc
    dataset = dataset.with_derived_velocities()
    try:
        params = _params_from_result_file(args.params)
    except ShipIdError as exc:
        raise UsageError(str(exc)) from exc
    thr = _load_thruster(args.thruster)

    horizons = cfg.get("horizons", [1, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50])
    if args.horizons:
        try:
            horizons = [int(tok) for tok in args.horizons.split(",") if tok.strip()]
        except ValueError as exc:
            raise UsageError(f"bad horizon list {args.horizons!r}") from exc

    p6 = None
    if args.compare:
        if not args.compare.startswith("six:"):
            raise UsageError("--compare expects six:<params6.json>")
        raw = _load_json(args.compare[4:], "6-parameter params")
        try:
            p6 = ShipParams6.from_dict(raw) if isinstance(raw, dict) \
                else ShipParams6.from_array(np.asarray(raw, dtype=float))
        except ShipIdError as exc:
            raise UsageError(str(exc)) from exc

    suite = validation.validation_suite(params, thr, dataset, horizons,
                                        out_dir=args.out, p6=p6)
    print(f"validated {len(dataset)} maneuvers over horizons {horizons}; "
          f"reports under {args.out}")
    if suite["comparison"] is not None:
        print("comparison written (full vs baseline model)")
    return EXIT_OK


def _parse_x0(text):
    vals = [float(tok) for tok in text.split(",")]
    if len(vals) != 8:
        raise UsageError("--x0 needs 8 comma-separated values: "
                         "alpha1,alpha2,x,y,psi,u,v,r (angles in degrees)")
    vals[0] = math.radians(vals[0])
    vals[1] = math.radians(vals[1])
    vals[4] = math.radians(vals[4])
    return np.array(vals)


def _load_commands_csv(path):
    if not Path(path).exists():
        raise UsageError(f"commands file not found: {path}")
    try:
        log = dataio.load_maneuver_csv(path)
        return log.cmds, log.dt
    except ParseError:
        pass
    # Plain command schedule: t,n1,n2,alpha1_cmd,alpha2_cmd
    import csv

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != ["t", "n1", "n2", "alpha1_cmd", "alpha2_cmd"]:
            raise UsageError(
                f"{path}: expected header t,n1,n2,alpha1_cmd,alpha2_cmd "
                "or a full maneuver CSV")
        rows = [[float(x) for x in row] for row in reader if row]
    if len(rows) < 1:
        raise UsageError(f"{path}: no command rows")
    arr = np.asarray(rows, dtype=float)
    if len(arr) > 1:
        dt = float(arr[1, 0] - arr[0, 0])
        if dt <= 0:
            raise UsageError(f"{path}: time column must increase")
    else:
        dt = None
    return arr[:, 1:5], dt


def cmd_simulate(args) -> int:
    params = _load_params(args.params)
    thr = _load_thruster(args.thruster)
    cmds, dt_file = _load_commands_csv(args.commands)
    dt = args.dt or dt_file
    if dt is None or dt <= 0:
        raise UsageError("provide --dt (single-row command files carry no period)")
    x0 = _parse_x0(args.x0) if args.x0 else np.zeros(8)

    from .actuation import default_thruster
    traj = simulate(params, thr or default_thruster(), x0, cmds, dt)
    dataio.export_trajectory_csv(traj, args.out, dt=dt)
    print(f"simulated {cmds.shape[0]} steps; trajectory written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shipid",
        description="System identification pipeline for a twin-azimuth-thruster vessel")
    parser.add_argument("--config", help="global JSON config (solver/estimation options)")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate synthetic maneuver CSVs")
    g.add_argument("--scenario", help="scenario JSON (plans + noise); default: stock 12 maneuvers")
    g.add_argument("--params", help="ground-truth 22-parameter JSON (default: reference tug)")
    g.add_argument("--thruster", help="thruster model JSON (default: reference tug)")
    g.add_argument("--seed", type=int, help="noise seed override")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("estimate", help="fit the 22-parameter model to a dataset")
    e.add_argument("--manifest", required=True, help="dataset manifest JSON")
    e.add_argument("--mode", choices=["lo", "go", "combined"])
    e.add_argument("--init", choices=["empirical"], default="empirical",
                   help="initialization scheme (empirical formulas)")
    e.add_argument("--specs", help="hull specs JSON for the empirical initialization")
    e.add_argument("--init-params", help="explicit initial 22-parameter JSON (overrides --init)")
    e.add_argument("--thruster", help="thruster model JSON")
    e.add_argument("--paper-literal-constraints", action="store_true",
                   help="keep the raw sign convention in the stability constraints")
    e.add_argument("--trace", action="store_true", help="include solver cost traces")
    e.add_argument("--out", required=True, help="result JSON path")
    e.set_defaults(func=cmd_estimate)

    v = sub.add_parser("validate", help="n-step prediction validation and reports")
    v.add_argument("--manifest", required=True)
    v.add_argument("--params", required=True,
                   help="22-parameter JSON or an estimation result JSON")
    v.add_argument("--thruster", help="thruster model JSON")
    v.add_argument("--horizons", help="comma-separated step counts (default 1,5,...,50)")
    v.add_argument("--compare", help="six:<params6.json> adds the baseline comparison")
    v.add_argument("--out", required=True, help="output directory")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("simulate", help="forward rollout under a command schedule")
    s.add_argument("--params", required=True)
    s.add_argument("--thruster")
    s.add_argument("--commands", required=True,
                   help="command CSV (t,n1,n2,alpha1_cmd,alpha2_cmd) or maneuver CSV")
    s.add_argument("--x0", help="initial state alpha1,alpha2,x,y,psi,u,v,r (angles in deg)")
    s.add_argument("--dt", type=float, help="step period override (s)")
    s.add_argument("--out", required=True, help="trajectory CSV path")
    s.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ShipIdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
