"""Command-line front end.

Subcommands: simulate, diagnose, constants, extension-check, isoperimetric,
energy-audit.  Common flags: --config <path>, --out <dir>, --seed <u64>,
--threads <n>, --format json|csv.  The environment variable SQG_NO_COLOR
disables ANSI colors in the per-check pass/fail lines.  Exit status is
nonzero iff an enabled check fails.
"""

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .constants import build_ledger
from .harness import (
    diagnose,
    extension_report,
    isoperimetric_report,
    load_config,
    simulate,
)


def _use_color():
    return os.environ.get("SQG_NO_COLOR", "") == "" and sys.stdout.isatty()


def _status_line(name, passed):
    tag = "PASS" if passed else "FAIL"
    if _use_color():
        color = "\033[32m" if passed else "\033[31m"
        tag = f"{color}{tag}\033[0m"
    return f"{tag} {name}"


def _emit_report(report, out_dir, fmt):
    for section in report.sections:
        print(_status_line(section["name"], section["passed"]))
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, "report.json")
        with open(path, "w") as fh:
            fh.write(report.to_json())
    if fmt == "json":
        print(report.to_json())
    else:
        print("section,passed")
        for section in report.sections:
            print(f"{section['name']},{int(section['passed'])}")
    return 0 if report.passed else 1


def _add_common(p):
    p.add_argument("--config", help="run configuration file (key = value)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--threads", type=int, default=1,
                   help="thread-count setting recorded with the run (transforms "
                        "here are single-threaded; accepted for interface stability)")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser():
    parser = argparse.ArgumentParser(prog="sqgdiag")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a configured simulation")
    _add_common(p)

    p = sub.add_parser("diagnose", help="run diagnostics over checkpoints")
    _add_common(p)
    p.add_argument("checkpoints", nargs="*", help="checkpoint files")
    p.add_argument("--checks", default="l2_monotone,energy_audit",
                   help="comma-separated diagnostic toggles (may be empty)")
    p.add_argument("--side-length", type=float, default=2.0 * np.pi)

    p = sub.add_parser("constants", help="emit the constants ledger as JSON")
    _add_common(p)
    p.add_argument("--L", type=float, required=True)
    p.add_argument("--C", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--M", type=float, default=1.0)

    p = sub.add_parser("extension-check", help="verify the weighted Neumann trace")
    _add_common(p)
    p.add_argument("--epsilons", default="0.0,0.05,0.1")
    p.add_argument("--n", type=int, default=64)

    p = sub.add_parser("isoperimetric", help="weighted isoperimetric family sweep")
    _add_common(p)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--samples", type=int, default=100_000)

    p = sub.add_parser("energy-audit", help="level-set energy audit of checkpoints")
    _add_common(p)
    p.add_argument("checkpoints", nargs="+", help="checkpoint files")
    p.add_argument("--side-length", type=float, default=2.0 * np.pi)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)

    if args.command == "simulate":
        if not args.config:
            print("simulate requires --config", file=sys.stderr)
            return 2
        config = load_config(args.config)
        if args.seed is not None:
            config = replace(config, seed=args.seed)
        if args.out:
            config = replace(config, output_dir=args.out)
        paths, report = simulate(config)
        print(_status_line("simulation", True))
        if args.format == "json":
            print(report.to_json())
        else:
            print("checkpoints")
            for p in paths:
                print(p)
        return 0

    if args.command in ("diagnose", "energy-audit"):
        toggles = (
            ["energy_audit"]
            if args.command == "energy-audit"
            else [t for t in args.checks.split(",") if t]
        )
        try:
            report = diagnose(args.checkpoints, toggles, side_length=args.side_length)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        return _emit_report(report, args.out, args.format)

    if args.command == "constants":
        ledger = build_ledger(args.L, args.C, args.alpha, args.eta, args.M)
        print(ledger.to_json())
        return 0 if ledger.all_feasible() else 1

    if args.command == "extension-check":
        epsilons = tuple(float(v) for v in args.epsilons.split(","))
        seed = args.seed if args.seed is not None else 0
        report = extension_report(epsilons=epsilons, n=args.n, seed=seed)
        return _emit_report(report, args.out, args.format)

    if args.command == "isoperimetric":
        seed = args.seed if args.seed is not None else 2025
        report = isoperimetric_report(count=args.count, samples=args.samples, seed=seed)
        return _emit_report(report, args.out, args.format)

    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
