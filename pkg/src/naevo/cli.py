# src/naevo/cli.py
"""
Command-line front end. Exit codes: 0 ok, 1 configuration, 2 certificate, 3 solve, 4 verification.
"""

import argparse
import logging
import sys
from typing import List, Optional

from .errors import NaevoError

logger = logging.getLogger("naevo.cli")

EXAMPLES = ("mixed-type", "kelvin-voigt")


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="naevo_config.json",
                        help="Path to the naevo configuration JSON file (default: naevo_config.json)")
    common.add_argument("--out", default=None, help="Output directory (overrides general.output_dir)")
    common.add_argument("--seed", type=int, default=None, help="Seed for randomized checks (overrides general.seed)")
    common.add_argument("--emit-plot-data", action="store_true", help="Also write plot_data/*.csv")
    common.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(prog="naevo", description="naevo - non-autonomous evolutionary equations")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("check", parents=[common], help="Certify rho*M0 + M0'/2 + Re M1 >= c0")
    commands.add_parser("solve", parents=[common], help="Solve the configured problem")
    commands.add_parser("verify", parents=[common], help="Run the configured verification checks")
    sweep = commands.add_parser("sweep-rho", parents=[common], help="Sweep the exponential weight rho")
    sweep.add_argument("--rho", type=float, nargs="+", default=None, help="rho values (overrides weight.sweep)")
    example = commands.add_parser("example", parents=[common], help="Run a worked example")
    example.add_argument("name", choices=EXAMPLES)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    # Basic logging until the runner has read the configured level.
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    from .core import Naevo

    try:
        app = Naevo(args.config, seed=args.seed, output_dir=args.out, quiet=args.quiet)
        if args.command == "check":
            app.check()
        elif args.command == "solve":
            app.solve(emit_plot_data=args.emit_plot_data)
        elif args.command == "verify":
            app.verify()
        elif args.command == "sweep-rho":
            app.sweep_rho(args.rho)
        elif args.command == "example":
            app.run_example(args.name, emit_plot_data=args.emit_plot_data)
    except NaevoError as e:
        logger.error(f"{type(e).__name__}: {e}", exc_info=logger.isEnabledFor(logging.DEBUG))
        return e.exit_code
    logger.info(f"Command '{args.command}' finished.")
    return 0


if __name__ == "__main__":
    sys.exit(main())
