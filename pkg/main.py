"""
Command-line entry point of the Holomorphic Algebroid Engine.

Exit status: 0 all blocking checks pass, 1 some check failed, 2 configuration
error, 3 input rejected (unsupported or degenerate data).
"""
import argparse
import logging
import sys
from typing import List, Optional

from config import APP_NAME, VERSION
from core.errors import AlgebroidError, ConfigError
from harness.catalog import catalog
from harness.export import report_json, write_manifest, write_report, write_trajectory_csv
from harness.runner import ScenarioRunner
from harness.scenario import COMMANDS, Scenario

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_REJECTED = 0, 1, 2, 3

_TOLERANCE_FLAGS = ("exact_ad", "metric", "fd", "ode", "exact", "transport")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="algebroid", description=f"{APP_NAME} v{VERSION}")
    parser.add_argument("command", choices=COMMANDS + ("catalog",))
    parser.add_argument("--scenario", help="scenario JSON file; flags override its fields")
    parser.add_argument("--algebroid", help="catalog name or path to a JSON definition")
    parser.add_argument("--lagrangian", help="Lagrangian in the expression language")
    parser.add_argument("--domain", choices=("onTM", "onE"), help="where the Lagrangian lives")
    parser.add_argument("--case", type=int, choices=(1, 2, 3), help="induction case (default: from the anchor rank)")
    parser.add_argument("--direction", choices=("E_to_TM", "TM_to_E"))
    parser.add_argument("--connection", help="JSON linear-connection block for torsion and curvature tables")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--points", type=int)
    parser.add_argument("--at", dest="probe", help='probe point, e.g. "z1=1,u1=2"')
    parser.add_argument("--t-end", type=float)
    parser.add_argument("--step", type=float)
    for name in _TOLERANCE_FLAGS:
        parser.add_argument(f"--tol-{name.replace('_', '-')}", dest=f"tol_{name}", type=float)
    parser.add_argument("--out", help="report JSON path (default: stdout)")
    parser.add_argument("--csv", help="trajectory CSV path (integrate, report)")
    parser.add_argument("--manifest", help="run manifest JSON path (integrate, report)")
    return parser


def scenario_from_args(args: argparse.Namespace) -> Scenario:
    """Scenario file (if any) overlaid with the command-line flags."""
    base = Scenario.load(args.scenario) if args.scenario else None
    data = base.model_dump() if base else {}
    if args.algebroid:
        data["algebroid"] = args.algebroid
    if "algebroid" not in data:
        raise ConfigError("An algebroid is required (--algebroid or a scenario file)")
    data["command"] = args.command
    for field in ("lagrangian", "case", "direction", "connection", "probe", "step", "t_end"):
        value = getattr(args, field)
        if value is not None:
            data[field] = value
    if args.domain:
        data["lagrangian_domain"] = args.domain
    sampling = data.setdefault("sampling", {})
    if args.seed is not None:
        sampling["seed"] = args.seed
    if args.points is not None:
        sampling["points"] = args.points
    tolerances = data.setdefault("tolerances", {})
    for name in _TOLERANCE_FLAGS:
        value = getattr(args, f"tol_{name}")
        if value is not None:
            tolerances[name] = value
    try:
        return Scenario.model_validate(data)
    except ValueError as e:
        raise ConfigError(f"Invalid command-line settings: {e}") from e


def print_catalog():
    for a in catalog():
        print(f"{a.name:16s} n={a.n} m={a.m} charts={len(a.charts)}")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "catalog":
        print_catalog()
        return EXIT_OK

    try:
        scenario = scenario_from_args(args)
        runner = ScenarioRunner(scenario)
        report = runner.run()
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except AlgebroidError as e:
        logger.error(f"Input rejected: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_REJECTED

    echo = runner.scenario_echo()
    if args.out:
        write_report(report, echo, args.out)
    else:
        print(report_json(report, echo))
    if runner.trajectory is not None:
        if args.csv:
            write_trajectory_csv(runner.trajectory, args.csv)
        if args.manifest:
            write_manifest(runner.trajectory, args.manifest, algebroid=runner.algebroid.name)

    if not report.passed:
        for check in report.failures():
            print(f"FAILED {check.name}: {check.max_residual:.3e} > {check.tolerance:.1e}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
