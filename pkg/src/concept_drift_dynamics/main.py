"""CLI entry point for concept-drift-dynamics."""

import argparse
import logging
import sys
from importlib.metadata import PackageNotFoundError
from importlib.metadata import version as pkg_version

from .modules.cli import run_compare, run_critical, run_list_scenarios, run_mc, run_ode, run_stability
from .modules.config import load_config
from .utils.errors import ConfigError, NumericalError
from .utils.scenarios import scenario_for_activation

logger = logging.getLogger(__name__)


def _package_version():
    try:
        return pkg_version("concept-drift-dynamics")
    except PackageNotFoundError:
        return "0.0.0+unknown"


_COMMANDS = {
    "ode": run_ode,
    "mc": run_mc,
    "compare": run_compare,
    "stability": run_stability,
    "critical": run_critical,
}


def _add_overrides(sub):
    """Flags shared by every experiment subcommand; unset flags keep the config value."""
    sub.add_argument("--gamma", type=float, default=None, help="Weight decay (gamma for LVQ, gamma~ for SCM)")
    sub.add_argument("--delta", type=float, default=None, help="Drift strength delta~ (SCM only)")
    sub.add_argument("--activation", choices=("erf", "relu"), default=None, help="SCM activation")
    sub.add_argument("--seed", type=int, default=None, help="Random seed of the Monte Carlo runs")
    sub.add_argument("--out", default=None, metavar="DIR", help="Output directory (default: value from config)")
    sub.add_argument("--t-end", dest="t_end", type=float, default=None, help="End of the learning time")
    sub.add_argument("--runs", type=int, default=None, help="Number of Monte Carlo runs")
    sub.add_argument("--raw", action="store_true", default=None, help="Also dump every Monte Carlo run")


def parse_args(argv=None):
    """Parse command-line arguments."""
    parser = argparse.ArgumentParser(
        prog="concept-drift-dynamics",
        description="Order-parameter ODEs, Monte Carlo simulations and plateau stability for on-line learning under concept drift.",
        allow_abbrev=False,
    )
    parser.add_argument("-V", "--verbose", action="store_true", help="Enable debug logging")
    parser.add_argument("-v", "--version", action="version", version=_package_version())

    subparsers = parser.add_subparsers(dest="command", required=True)

    # --- ode / mc / compare / stability ---
    for name, text in (
        ("ode", "Integrate the ODEs and write the learning curves"),
        ("mc", "Run the finite-N Monte Carlo simulation"),
        ("compare", "Run both and write the joined table with differences"),
        ("stability", "Symmetric fixed point, lambda_s and parameter scans (SCM)"),
    ):
        sub = subparsers.add_parser(name, help=text)
        sub.add_argument("target", metavar="CONFIG", help="Scenario name or path to a config JSON file")
        _add_overrides(sub)

    # --- critical ---
    sub_critical = subparsers.add_parser("critical", help="Bisect for the critical drift / weight decay (SCM)")
    sub_critical.add_argument(
        "target",
        nargs="?",
        default=None,
        metavar="CONFIG",
        help="Scenario name or config path (default: scan preset of --activation)",
    )
    _add_overrides(sub_critical)

    # --- list-scenarios ---
    subparsers.add_parser("list-scenarios", help="Show the available presets")

    # --- version ---
    subparsers.add_parser("version", help="Show version")

    return parser.parse_args(argv)


def main(argv=None):
    """Application entry point; returns the process exit status."""
    args = parse_args(argv)
    log_fmt = "%(asctime)s [%(levelname)s] %(name)s: %(message)s" if args.verbose else "%(asctime)s [%(levelname)s] %(message)s"
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format=log_fmt,
        datefmt="%Y-%m-%d %H:%M:%S",
        stream=sys.stdout,
    )

    if args.command == "version":
        print(_package_version())
        return 0

    if args.command == "list-scenarios":
        run_list_scenarios()
        return 0

    overrides = {key: getattr(args, key) for key in ("gamma", "delta", "activation", "seed", "out", "t_end", "runs", "raw")}
    target = args.target or scenario_for_activation(args.activation)
    try:
        config = load_config(target, overrides)
        logger.debug("Scenario %s (%s), outputs: %s", config.scenario, config.system, config.outputs)
        _COMMANDS[args.command](config)
    except ConfigError as exc:
        logger.error("%s", exc)
        return 1
    except NumericalError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
