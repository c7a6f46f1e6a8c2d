"""Command-line surface for batch analyses and the teleoperation service.

Exit codes: 0 success, 1 runtime or solver failure, 2 usage or
validation error.  Every command is deterministic given --seed; when
--out is given, a reproducibility manifest is written next to it as
<out>.run.json (the only artifact that carries a timestamp).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from . import actuation, session, sizing, units
from .chain import (BallSpec, ChainConfig, EnvField, SleeveSpec, SolverConfig,
                    alignment_angle, solve_equilibrium)
from .magnetics import Dipole, newton_to_gf


class CliError(Exception):
    """Validation or usage failure; maps to exit code 2."""


def _parse_list(text, cast=float):
    """Parse "a,b,c" or "start:stop[:step]" (inclusive stop) into a list."""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) == 2:
            start, stop, step = parts[0], parts[1], 1.0
        elif len(parts) == 3:
            start, stop, step = parts
        else:
            raise CliError(f"bad range {text!r}; use start:stop[:step]")
        if step <= 0 or stop < start:
            raise CliError(f"bad range {text!r}")
        values = np.arange(start, stop + 0.5 * step, step)
        return [cast(v) for v in values]
    try:
        return [cast(float(p)) for p in text.split(",") if p.strip()]
    except ValueError:
        raise CliError(f"cannot parse list {text!r}") from None


def _load_config(source):
    """Solve-config JSON from a bundled name (fig5, zero-field) or a path."""
    name = str(source)
    text = None
    if "/" not in name and not name.endswith(".json"):
        bundled = resources.files("ballchain") / "configs" / f"{name}.json"
        if bundled.is_file():
            text = bundled.read_text()
    if text is None:
        path = Path(source)
        if not path.is_file():
            raise CliError(f"no bundled config or file named {name!r}")
        text = path.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"invalid JSON in {name!r}: {exc}") from None


def _chain_from_config(doc, args):
    cdoc = doc.get("chain")
    if not isinstance(cdoc, dict):
        raise CliError("config.chain: required object")
    problems = []
    for key in cdoc:
        if key not in {"balls", "ball_diameter", "remanence", "base_position",
                       "base_tangent", "gravity", "sleeve"}:
            problems.append(f"config.chain: unknown key {key!r}")
    if problems:
        raise CliError("; ".join(problems))
    n = args.balls if args.balls is not None else cdoc.get("balls", 8)
    if not isinstance(n, int) or n < 1:
        raise CliError("config.chain.balls: must be an integer >= 1")
    try:
        diameter = units.parse_quantity(cdoc.get("ball_diameter", 3.175e-3),
                                        "length")
        ball = BallSpec.from_material(diameter, cdoc.get("remanence", 1.45))
        base_p = units.parse_vector(cdoc.get("base_position", [0, 0, 0]), "length")
        base_t = np.asarray(cdoc.get("base_tangent", [1.0, 0, 0]), dtype=float)
        gravity = np.asarray(cdoc.get("gravity", [0.0, 0, 0]), dtype=float)
    except ValueError as exc:
        raise CliError(f"config.chain: {exc}") from None

    sleeve = None
    sdoc = cdoc.get("sleeve")
    sleeve_flag = getattr(args, "sleeve", None)
    if sleeve_flag == "on" and sdoc is None:
        sdoc = {}
    if sleeve_flag == "off":
        sdoc = None
    if sdoc is not None:
        try:
            sleeve = SleeveSpec.from_tube(
                units.parse_quantity(sdoc.get("outer_diameter", 3.5e-3), "length"),
                units.parse_quantity(sdoc.get("inner_diameter", 3.0e-3), "length"),
                units.parse_quantity(sdoc.get("elastic_modulus", 340.0e3),
                                     "pressure"))
        except ValueError as exc:
            raise CliError(f"config.chain.sleeve: {exc}") from None
    return ChainConfig(n, ball, sleeve=sleeve, base_position=base_p,
                       base_tangent=base_t, gravity=gravity)


def _field_from_config(doc, args):
    fdoc = doc.get("field")
    if not isinstance(fdoc, dict):
        raise CliError("config.field: required object")
    mode = fdoc.get("mode", "uniform")
    if mode == "uniform":
        try:
            mag = units.parse_quantity(fdoc.get("magnitude", 0.0), "field")
        except ValueError as exc:
            raise CliError(f"config.field.magnitude: {exc}") from None
        if args.field_mt is not None:
            mag = args.field_mt * 1e-3
        angle = fdoc.get("angle_deg", 0.0)
        if args.angle is not None:
            angle = args.angle
        direction = fdoc.get("direction")
        if direction is not None:
            direction = np.asarray(direction, dtype=float)
            direction = direction / np.linalg.norm(direction)
        else:
            a = np.deg2rad(float(angle))
            direction = np.array([np.cos(a), np.sin(a), 0.0])
        return EnvField.uniform(mag * direction), mag * direction
    if mode == "sources":
        sources = []
        for i, sdoc in enumerate(fdoc.get("sources", [])):
            try:
                pos = units.parse_vector(sdoc["position"], "length")
                if "moment" in sdoc:
                    mom = np.asarray(sdoc["moment"], dtype=float)
                else:
                    direction = np.asarray(sdoc["direction"], dtype=float)
                    mom = float(sdoc["magnitude"]) * direction / np.linalg.norm(direction)
            except (KeyError, ValueError, TypeError) as exc:
                raise CliError(f"config.field.sources[{i}]: {exc}") from None
            sources.append(Dipole(pos, mom))
        if not sources:
            raise CliError("config.field.sources: at least one source required")
        return EnvField.from_sources(sources), None
    raise CliError("config.field.mode: must be 'uniform' or 'sources'")


def _emit(text, out_path):
    if out_path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return []
    path = Path(out_path)
    path.write_text(text if text.endswith("\n") else text + "\n")
    return [str(path)]


def _write_manifest(args, command, config_snapshot, outputs):
    if args.out is None:
        return
    manifest = {
        "command": command,
        "config": config_snapshot,
        "outputs": outputs,
        "seed": args.seed,
        "created": datetime.now(timezone.utc).isoformat(),
    }
    Path(str(args.out) + ".run.json").write_text(
        json.dumps(manifest, indent=2) + "\n")


def cmd_solve(args):
    doc = _load_config(args.config)
    config = _chain_from_config(doc, args)
    env, uniform = _field_from_config(doc, args)
    result = solve_equilibrium(config, env, SolverConfig(seed=args.seed))
    if not result.converged:
        print(f"solver did not converge (|g| = {result.gradient_norm:.2e})",
              file=sys.stderr)
        return 1
    shape = result.shape
    out = {
        "n": config.n,
        "positions": [[float(x) for x in p] for p in shape.positions],
        "dipole_dirs": [[float(x) for x in m] for m in shape.dipole_dirs],
        "tip": [float(x) for x in shape.tip_position],
        "energy": float(result.energy),
        "gradient_norm": float(result.gradient_norm),
        "iterations": int(result.iterations),
        "converged": True,
    }
    if uniform is not None and np.linalg.norm(uniform) > 0.0:
        mis = alignment_angle(uniform, shape.dipole_dirs[-1])
        out["alignment_deg"] = float(np.rad2deg(mis))
    outputs = _emit(json.dumps(out, indent=2), args.out)
    _write_manifest(args, "solve", {"config": doc, "balls": config.n,
                                    "angle": args.angle,
                                    "field_mt": args.field_mt,
                                    "sleeve": args.sleeve}, outputs)
    return 0


def cmd_align(args):
    lengths = _parse_list(args.lengths, int)
    angles = _parse_list(args.angles, float)
    sleeve = SleeveSpec.from_tube() if args.sleeve == "on" else None
    rows = session.run_alignment_study(lengths=lengths,
                                       field_magnitude=args.field_mt * 1e-3,
                                       angles_deg=angles, sleeve=sleeve)
    outputs = _emit(session.alignment_csv(rows), args.out)
    _write_manifest(args, "align", {"lengths": lengths, "angles": angles,
                                    "field_mt": args.field_mt,
                                    "sleeve": args.sleeve}, outputs)
    return 0


def cmd_sweep(args):
    scenario = session.load_scenario(args.scenario)
    if not scenario.units:
        raise CliError("sweep needs a scenario with at least one actuation unit")
    unit = scenario.units[0]
    lengths = _parse_list(args.lengths, int)
    angles = np.asarray(_parse_list(args.angles, float))
    variants = {"on": [True], "off": [False],
                "both": [False, True]}[args.sleeve]
    report = {"scenario": scenario.name, "lengths": lengths,
              "angles_deg": [float(a) for a in angles], "areas_mm2": {}}
    results = {}
    for with_sleeve in variants:
        config = scenario.chain
        if with_sleeve and config.sleeve is None:
            config = dataclasses.replace(config, sleeve=SleeveSpec.from_tube())
        if not with_sleeve and config.sleeve is not None:
            config = dataclasses.replace(config, sleeve=None)
        res = session.sweep_workspace(config, unit.position,
                                      unit.moment_magnitude, angles,
                                      lengths=lengths)
        key = "sleeve_on" if with_sleeve else "sleeve_off"
        results[key] = res
        report["areas_mm2"][key] = res.area * 1e6
        if res.skipped:
            report.setdefault("skipped", {})[key] = res.skipped
    if len(results) == 2:
        report["area_ratio"] = (report["areas_mm2"]["sleeve_on"]
                                / report["areas_mm2"]["sleeve_off"])
    key = "sleeve_on" if variants[-1] else "sleeve_off"
    report["tips_mm"] = {
        str(n): [[float(c) * 1e3 for c in row] for row in rows]
        for n, rows in results[key].tips.items()}
    outputs = _emit(json.dumps(report, indent=2), args.out)
    _write_manifest(args, "sweep", {"scenario": scenario.describe(),
                                    "sleeve": args.sleeve}, outputs)
    return 0


def cmd_design(args):
    problem = sizing.SizingProblem.bench_defaults()
    problem = dataclasses.replace(
        problem,
        measured_force=args.measured_force_gf * units.GRAM_FORCE,
        desired_force=args.desired_force_gf * units.GRAM_FORCE,
        remanence=args.remanence)
    if args.half_breadth_cm is not None:
        problem = dataclasses.replace(problem,
                                      patient_half_breadth=args.half_breadth_cm * 1e-2)
    result = sizing.solve_magnet_diameter(problem)
    separation = 2.0 * problem.patient_half_breadth + result.diameter
    inter = sizing.inter_magnet_force(result.diameter, separation,
                                      problem.remanence)
    out = {
        "diameter_mm": result.diameter * 1e3,
        "mass_kg": result.mass,
        "residual": result.residual,
        "inter_magnet_force_gf": newton_to_gf(inter),
        "inter_magnet_separation_m": separation,
    }
    outputs = _emit(json.dumps(out, indent=2), args.out)
    _write_manifest(args, "design", {"problem": dataclasses.asdict(problem)},
                    outputs)
    return 0


def cmd_reconfig(args):
    rng = np.random.default_rng(args.seed)
    a = np.deg2rad(args.start_angle)
    axis = np.array([1.0, 0.0, 0.0])
    target = np.cos(a) * np.array([0.0, 0.0, 1.0]) + np.sin(a) * axis
    unit = actuation.ActuationUnit(gain=args.gain,
                                   wheel_slip=np.asarray(
                                       _parse_list(args.slip), dtype=float),
                                   sensor_noise=args.noise_mt * 1e-3)
    result = actuation.reconfigure_run(unit, target, args.dt,
                                       max_steps=args.max_steps,
                                       tolerance=np.deg2rad(args.tolerance_deg),
                                       rng=rng if args.noise_mt > 0 else None)
    lines = ["step,angle_deg"]
    for k, ang in enumerate(result.angles):
        lines.append(f"{k},{np.rad2deg(ang):.9g}")
    outputs = _emit("\n".join(lines) + "\n", args.out)
    _write_manifest(args, "reconfig",
                    {"start_angle": args.start_angle, "gain": args.gain,
                     "dt": args.dt, "slip": args.slip,
                     "noise_mt": args.noise_mt}, outputs)
    if not result.converged:
        print(f"did not converge within {args.max_steps} steps "
              f"(final {np.rad2deg(result.final_angle):.2f} deg)",
              file=sys.stderr)
        return 1
    return 0


def cmd_serve(args):
    from . import service   # deferred; pulls in fastapi/uvicorn
    scenario = session.load_scenario(args.scenario)
    try:
        service.serve(scenario, bind=args.bind, log_path=args.log,
                      static_dir=args.static)
    except OSError as exc:
        print(f"cannot bind {args.bind}: {exc}", file=sys.stderr)
        return 1
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ballchain",
        description="Simulation and teleoperation tools for magnetic "
                    "ball-chain catheters.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=None, metavar="PATH",
                       help="output file (default: stdout); a <out>.run.json "
                            "manifest is written alongside")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for any randomized internals (default 0)")

    p = sub.add_parser("solve", help="solve one equilibrium shape to JSON")
    p.add_argument("--config", default="fig5",
                   help="bundled config name (fig5, zero-field) or JSON path")
    p.add_argument("--balls", type=int, default=None,
                   help="override chain length")
    p.add_argument("--angle", type=float, default=None, metavar="DEG",
                   help="override uniform-field angle in the x-y plane")
    p.add_argument("--field-mt", type=float, default=None, metavar="MT",
                   help="override uniform-field magnitude in millitesla")
    p.add_argument("--sleeve", choices=["on", "off"], default=None,
                   help="override sleeve on/off")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("align", help="tip-alignment study to CSV")
    p.add_argument("--field-mt", type=float, default=23.0, metavar="MT")
    p.add_argument("--lengths", default="1:16",
                   help="chain lengths, e.g. 1:16 or 4,9,16")
    p.add_argument("--angles", default="0:180:22.5",
                   help="field angles in degrees, e.g. 0:180:22.5")
    p.add_argument("--sleeve", choices=["on", "off"], default="off")
    common(p)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("sweep", help="workspace sweep areas to JSON")
    p.add_argument("--scenario", default="bench-sweep",
                   help="bundled scenario name or JSON path")
    p.add_argument("--angles", default="0:180:7.5")
    p.add_argument("--lengths", default="4,9,16")
    p.add_argument("--sleeve", choices=["on", "off", "both"], default="both")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("design", help="size the actuation magnet to JSON")
    p.add_argument("--measured-force-gf", type=float, default=132.6,
                   help="bench-measured chain force in gram-force")
    p.add_argument("--desired-force-gf", type=float, default=10.0,
                   help="required force at patient scale in gram-force")
    p.add_argument("--remanence", type=float, default=1.45, metavar="T")
    p.add_argument("--half-breadth-cm", type=float, default=None,
                   help="override the patient half-breadth in centimeters")
    common(p)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("reconfig", help="axis-reconfiguration run to CSV")
    p.add_argument("--start-angle", type=float, default=90.0, metavar="DEG")
    p.add_argument("--gain", type=float, default=10.0, help="control gain K, 1/s")
    p.add_argument("--dt", type=float, default=0.01, help="control period, s")
    p.add_argument("--max-steps", type=int, default=500)
    p.add_argument("--tolerance-deg", type=float, default=0.5)
    p.add_argument("--slip", default="1,1,1",
                   help="per-wheel speed factors, e.g. 0.95,1,1.02")
    p.add_argument("--noise-mt", type=float, default=0.0,
                   help="sensor noise sigma in millitesla")
    common(p)
    p.set_defaults(func=cmd_reconfig)

    p = sub.add_parser("serve", help="run the teleoperation service")
    p.add_argument("--scenario", default="pv-rings")
    p.add_argument("--bind", default="127.0.0.1:8000", metavar="HOST:PORT")
    p.add_argument("--log", default=None, metavar="PATH",
                   help="JSON-lines session log path")
    p.add_argument("--static", default=None, metavar="DIR",
                   help="directory with the built browser UI")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, session.ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
