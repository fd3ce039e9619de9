"""
wgspec - Main Entry Point.

Builds the subcommand parser, loads the scenario config and dispatches to
the command handlers. Exit codes: 0 ok, 2 bad input, 3 hypothesis not met,
4 numerical failure, 1 unexpected.
"""

import argparse
import sys

from src.cli.commands import COMMANDS
from src.cli.commands.certify import THEOREMS
from src.cli.dependencies import get_report_service, load_config
from src.core.config import get_settings
from src.core.exceptions import EXIT_OK, AppException, handle_exception
from src.core.logging import end_run, get_logger, setup_logging, start_run
from src.services.report_service import render_json
from src.services.verification_service import VerificationService

settings = get_settings()
logger = get_logger(__name__)

HELP = {
    "section": "threshold E1(0), ground mode and section constants",
    "bands": "band functions E_n(p) over a momentum grid (CSV)",
    "potential": "effective potential V(x) and its integral",
    "bound1d": "bound states of the effective 1D operator",
    "tube": "lowest eigenvalues of truncated tubes and candidate classification",
    "certify": "trial-function certificates",
    "thin-sweep": "1D bound-state counts against eps",
    "asympt": "lambda_j(-d^2/dx^2 + mu W)/mu against mu",
    "verify-all": "bundled acceptance scenarios",
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", "-c", help="scenario JSON file (defaults when omitted)")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config leaf by dotted path, e.g. profile.beta1=1",
    )
    p.add_argument("--output", "-o", help="report directory (overrides output.directory)")
    p.add_argument("--print", dest="print_report", action="store_true", help="echo the JSON report")


def create_parser() -> argparse.ArgumentParser:
    """Parser factory."""
    parser = argparse.ArgumentParser(
        prog=settings.app_name,
        description="Spectral toolkit for waveguides with translated parallel cross-sections",
    )
    parser.add_argument("--version", action="version", version=settings.app_version)
    sub = parser.add_subparsers(dest="command", required=True)

    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        _add_common(p)
        if name == "certify":
            p.add_argument("theorem", choices=THEOREMS)
        if name == "verify-all":
            p.add_argument(
                "--only",
                nargs="+",
                choices=list(VerificationService().scenarios()),
                help="run only these scenarios",
            )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = create_parser().parse_args(argv)
    setup_logging()
    run_id = start_run(args.command)
    logger.info("run_started", run_id=run_id, version=settings.app_version)
    try:
        cfg = load_config(args.config, args.overrides)
        reports = get_report_service(cfg, args.output)
        envelope = COMMANDS[args.command](cfg, args, reports)
        if args.print_report:
            sys.stdout.write(render_json(envelope))
        logger.info("run_finished", exit_code=EXIT_OK)
        return EXIT_OK
    except Exception as exc:
        code = handle_exception(exc)
        if isinstance(exc, AppException):
            print(f"error [{exc.error_code}]: {exc.message}", file=sys.stderr)
        return code
    finally:
        end_run()


if __name__ == "__main__":
    sys.exit(main())
