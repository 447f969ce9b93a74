"""Command line entry point: ``hardcongestion <subcommand> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from . import harness
from .errors import CongestionError
from .trajectory import load_trajectory


def _config(args) -> harness.ExperimentConfig:
    if args.config:
        data = yaml.safe_load(Path(args.config).read_text()) or {}
    else:
        data = {}
    if getattr(args, "scenario", None) == "double-well" and not args.config:
        base = harness.double_well_benchmark().to_dict()
        base.pop("tolerances")
        data = {**base, **data}
    overrides = {
        "rho0": args.rho0,
        "N": args.N,
        "tau": args.tau,
        "T": args.T,
        "out": args.out,
        "seed": args.seed,
        "workers": args.workers,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    return harness.ExperimentConfig.from_dict(data)


def _report(result: harness.SweepResult) -> int:
    for line in result.summary_lines():
        print(line)
    return 0 if result.passed else 1


def cmd_simulate(args) -> int:
    cfg = _config(args)
    traj, diag = harness.simulate(cfg)
    print(f"N={traj.n} tau={traj.tau:g} steps={traj.steps} ok={diag['ok']}")
    for rec in diag["estimates"]:
        print(f"{'PASS' if rec['pass'] else 'FAIL'}  {rec['name']}: {rec['lhs']:.6g} <= {rec['rhs']:.6g}")
    return 0 if diag["ok"] else 1


def cmd_sweep_tau(args) -> int:
    return _report(harness.sweep_tau(_config(args)))


def cmd_sweep_n(args) -> int:
    return _report(harness.sweep_N(_config(args)))


def cmd_steady_state(args) -> int:
    return _report(harness.steady_state_benchmark(_config(args)))


def cmd_validate(args) -> int:
    res = harness.validate(seed=args.seed or 0, scenarios=args.scenarios, out=args.out)
    return _report(res)


def cmd_export_fields(args) -> int:
    if args.trajectory:
        traj = load_trajectory(args.trajectory)
    else:
        traj, _ = harness.simulate(_config(args))
    out = Path(args.out or ".") / "fields.csv"
    harness.export_fields(traj, out, every=args.every)
    print(out)
    return 0


def _common(p):
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--scenario", choices=["quadratic", "double-well"], default=None)
    p.add_argument("--rho0", help="density file or uniform:<a>,<b>")
    p.add_argument("--N", type=int, nargs="+", default=None)
    p.add_argument("--tau", type=float, nargs="+", default=None)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--out", help="output directory for CSV/JSON")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hardcongestion", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    table = {
        "simulate": cmd_simulate,
        "sweep-tau": cmd_sweep_tau,
        "sweep-n": cmd_sweep_n,
        "steady-state": cmd_steady_state,
        "validate": cmd_validate,
        "export-fields": cmd_export_fields,
    }
    for name, func in table.items():
        p = sub.add_parser(name)
        _common(p)
        p.set_defaults(func=func)
        if name == "validate":
            p.add_argument("--scenarios", type=int, default=200)
        if name == "export-fields":
            p.add_argument("--every", type=int, default=1)
            p.add_argument("--trajectory", help="saved trajectory (path stem) instead of a fresh run")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CongestionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
