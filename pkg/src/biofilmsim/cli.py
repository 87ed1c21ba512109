"""Command-line front end: run scenarios, list presets, verify the solver.

Exit status: 0 on success, 1 when a simulation or verification fails,
2 on usage errors.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import verification
from .output import write_trajectory
from .scenarios import (
    PRESET_DESCRIPTIONS,
    PRESET_NAMES,
    ConfigError,
    load_config,
    preset,
    serialize_config,
)
from .solver import run as run_scenario


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biofilmsim",
        description="Simulate multi-species biofilm communities under "
                    "nutrient and antibiotic forcing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a preset or a config file and write a CSV")
    src = p_run.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help="name of a built-in scenario")
    src.add_argument("--config", help="path to a configuration file")
    p_run.add_argument("--out", help="CSV output path (default <scenario>.csv)")
    p_run.add_argument("--dt", type=float, help="override the time-step size")
    p_run.add_argument("--steps", type=int, help="override the number of steps")
    p_run.add_argument("--dump-config", action="store_true",
                       help="print the fully resolved configuration and exit")

    sub.add_parser("list-presets", help="list the built-in scenarios")

    p_verify = sub.add_parser("verify", help="run the verification suite")
    p_verify.add_argument("--quick", action="store_true",
                          help="reduced sample counts, skip the reference-integrator check")
    p_verify.add_argument("--out", default="verification_report.csv",
                          help="where to write the machine-readable summary")
    return parser


def _cmd_run(args, parser) -> int:
    if args.preset is not None:
        if args.preset not in PRESET_NAMES:
            parser.error(f"unknown preset {args.preset!r}; "
                         f"run 'biofilmsim list-presets' for the valid names")
        config = preset(args.preset)
    else:
        try:
            config = load_config(args.config)
        except OSError as exc:
            parser.error(f"cannot read --config file: {exc}")
        except ConfigError as exc:
            parser.error(f"invalid --config file: {exc}")
        config = replace(config, name=config.name or "scenario")

    overrides = {}
    if args.dt is not None:
        if args.dt <= 0:
            parser.error("--dt must be a positive number")
        overrides["dt"] = args.dt
    if args.steps is not None:
        if args.steps < 0:
            parser.error("--steps must be non-negative")
        overrides["steps"] = args.steps
    if overrides:
        config = replace(config, settings=replace(config.settings, **overrides))

    if args.dump_config:
        sys.stdout.write(serialize_config(config))
        return 0

    out = args.out or config.output_path or f"{config.name or 'scenario'}.csv"
    config = replace(config, output_path=out)
    print(f"running {config.name or 'scenario'}: n={config.params.n}, "
          f"dt={config.settings.dt:g}, steps={config.settings.steps}")
    traj = run_scenario(config)
    if not traj.termination.ok:
        print(f"simulation failed at step {traj.termination.step}: "
              f"{traj.termination.detail}", file=sys.stderr)
        partial = out + ".partial"
        write_trajectory(traj, partial)
        print(f"partial trajectory written to {partial}", file=sys.stderr)
        return 1
    write_trajectory(traj, out)
    last = traj.states[-1]
    print(f"finished ({traj.termination.reason} at step {traj.termination.step}); "
          f"wrote {out}")
    print(f"final state: phi0={last.phi0:.6g}, phi={[f'{v:.6g}' for v in last.phi]}, "
          f"psi={[f'{v:.6g}' for v in last.psi]}")
    return 0


def _cmd_list_presets() -> int:
    width = max(len(name) for name in PRESET_NAMES)
    for name in PRESET_NAMES:
        print(f"{name:<{width}}  {PRESET_DESCRIPTIONS[name]}")
    return 0


def _cmd_verify(args) -> int:
    reports = verification.run_verification(quick=args.quick)
    width = max(len(r.name) for r in reports)
    for r in reports:
        status = "pass" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {status}  worst={r.worst_error:.3e}  {r.location}")
    verification.write_report(reports, args.out)
    print(f"summary written to {args.out}")
    failed = sum(not r.passed for r in reports)
    if failed:
        print(f"{failed} of {len(reports)} checks failed", file=sys.stderr)
        return 1
    print(f"all {len(reports)} checks passed")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        return _cmd_run(args, parser)
    if args.command == "list-presets":
        return _cmd_list_presets()
    if args.command == "verify":
        return _cmd_verify(args)
    parser.error(f"unknown command {args.command!r}")  # pragma: no cover
    return 2


if __name__ == "__main__":
    sys.exit(main())
