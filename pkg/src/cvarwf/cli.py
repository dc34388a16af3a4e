"""Command line interface.

Subcommands: ``run`` a scenario (preset name or TOML file), ``sweep`` its
confidence grid, ``verify`` the oracle suite against an output directory,
and ``presets list``. Exit code 0 on success, nonzero on any error or a
failed verify. Log verbosity comes from the CVARWF_LOG environment
variable (e.g. CVARWF_LOG=info).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .outputs import run_scenario, sweep_surface
from .scenario import ScenarioError, load_scenario, preset_names
from .verify import verify


def _setup_logging() -> None:
    level = os.environ.get("CVARWF_LOG", "warning").upper()
    logging.basicConfig(format="%(message)s")
    logging.getLogger("cvarwf").setLevel(getattr(logging, level, logging.WARNING))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvarwf",
        description="Risk-aware power allocation experiments on fading channels",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and emit its tables")
    p_run.add_argument("scenario", help="preset name or scenario TOML file")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--iters", type=int, default=None, help="override the iteration count")

    p_sweep = sub.add_parser("sweep", help="run the scenario's confidence sweep grid")
    p_sweep.add_argument("scenario", help="preset name or scenario TOML file")
    p_sweep.add_argument("--out", required=True, help="output directory")
    p_sweep.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_sweep.add_argument("--iters", type=int, default=None, help="override the iteration count")

    p_verify = sub.add_parser("verify", help="run the oracle suite and check emitted tables")
    p_verify.add_argument("--out", required=True, help="directory to check and write the report to")

    p_presets = sub.add_parser("presets", help="preset utilities")
    p_presets.add_argument("action", choices=["list"])
    return parser


def _load(args):
    scenario = load_scenario(args.scenario)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.iters is not None:
        overrides["iterations"] = args.iters
    return scenario.with_solver(**overrides) if overrides else scenario


def main(argv=None) -> int:
    _setup_logging()
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            paths = run_scenario(_load(args), args.out)
            for kind, path in sorted(paths.items()):
                print(f"{kind}: {path}")
            return 0
        if args.command == "sweep":
            path = sweep_surface(_load(args), args.out)
            print(f"surface: {path}")
            return 0
        if args.command == "verify":
            report = verify(args.out)
            for check in report["checks"]:
                print(f"[{check['status'].upper():7s}] {check['name']}: {check['detail']}")
            if report["n_failed"]:
                print(f"FAILED: {report['n_failed']} check(s)", file=sys.stderr)
                return 1
            print("all checks passed")
            return 0
        if args.command == "presets":
            for name in preset_names():
                print(name)
            return 0
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
