"""Argparse wiring for the ``qsp`` command; maps outcomes and errors to exit codes."""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from typing import Callable

from pydantic import ValidationError

from harness.catalog import list_families
from harness.run import ConfigError, RunOutcome, load_config, run_eval, run_simulate, run_verify
from qsp.console import Console
from qsp.defaults import EXIT_CHECK_FAILED, EXIT_CONFIG_ERROR, EXIT_INTERNAL_ERROR, EXIT_OK
from qsp.errors import ConstructionError, DomainError, EvaluationError, ExpressionSyntaxError
from shared.event_log import EventLog

logger = logging.getLogger(__name__)


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--events", default=None, help="Append structured JSONL events to this file")
    p.add_argument("--verbose", action="store_true", default=False)
    p.add_argument("--quiet", action="store_true", default=False)
    p.add_argument("--no-color", action="store_true", default=False)


def _console(args: argparse.Namespace) -> Console:
    verbosity = "verbose" if args.verbose else "quiet" if args.quiet else "normal"
    return Console(verbosity=verbosity, color=False if args.no_color else None)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _build_list_parser(subparsers: argparse._SubParsersAction) -> None:
    subparsers.add_parser(
        "list",
        help="List every family with its parameter signature",
        description="Print every registered family: signature, stochasticity kind, product and description.",
    )


def _build_verify_parser(subparsers: argparse._SubParsersAction) -> None:
    p = subparsers.add_parser(
        "verify",
        help="Check stochasticity and the Kolmogorov-Chapman equation on a grid",
        description=(
            "Build the configured family and sweep its grid: stochasticity, the "
            "Kolmogorov-Chapman equation under its product and, for twin families, "
            "the nine slot equations. Writes output.report when set."
        ),
    )
    p.add_argument("--config", required=True, help="Path to the JSON run config")
    p.add_argument("--strict", action="store_true", default=False, help="Treat family warnings as failures")
    p.add_argument("--tol", type=float, default=None, help="Kolmogorov-Chapman tolerance (overrides config and env)")
    _add_output_flags(p)


def _build_simulate_parser(subparsers: argparse._SubParsersAction) -> None:
    p = subparsers.add_parser(
        "simulate",
        help="Evolve a distribution and write the trajectory CSV",
        description="Apply the configured family to simulation.x0 at every output time.",
    )
    p.add_argument("--config", required=True, help="Path to the JSON run config")
    p.add_argument("--out", default=None, help="Trajectory CSV path (default: output.trajectory)")
    _add_output_flags(p)


def _build_eval_parser(subparsers: argparse._SubParsersAction) -> None:
    p = subparsers.add_parser(
        "eval",
        help="Evaluate the family at one (s, t) and write the matrix",
        description="Write M^[s,t] of the configured family as JSON or text (output.matrix_format).",
    )
    p.add_argument("--config", required=True, help="Path to the JSON run config")
    p.add_argument("--s", type=float, required=True, help="Start time s >= 0")
    p.add_argument("--t", type=float, required=True, help="End time t >= s")
    p.add_argument("--out", default=None, help="Matrix file path (default: output.matrix)")
    _add_output_flags(p)


def _run_list(args: argparse.Namespace) -> int:
    sys.stdout.write(list_families())
    return EXIT_OK


def _with_config(
    args: argparse.Namespace,
    action: Callable[..., RunOutcome],
    **kwargs: object,
) -> int:
    con = _console(args)
    try:
        cfg = load_config(args.config)
        with contextlib.ExitStack() as stack:
            events = stack.enter_context(EventLog(args.events)) if args.events else None
            outcome = action(cfg, console=con, events=events, **kwargs)
        return outcome.exit_code
    except (ConfigError, ValidationError, ExpressionSyntaxError, DomainError) as exc:
        con.error(str(exc))
        return EXIT_CONFIG_ERROR
    except ConstructionError as exc:
        con.error(str(exc.finding))
        con.verdict("FAIL")
        return EXIT_CHECK_FAILED
    except EvaluationError as exc:
        con.error(f"evaluation failed: {exc}")
        con.verdict("ERROR")
        return EXIT_INTERNAL_ERROR
    except Exception as exc:  # noqa: BLE001
        logger.exception("unhandled error")
        con.error(f"unhandled {type(exc).__name__}: {exc}")
        con.verdict("ERROR")
        return EXIT_INTERNAL_ERROR


def _run_verify(args: argparse.Namespace) -> int:
    return _with_config(args, run_verify, tol=args.tol, strict=args.strict)


def _run_simulate(args: argparse.Namespace) -> int:
    return _with_config(args, run_simulate, out=args.out)


def _run_eval(args: argparse.Namespace) -> int:
    return _with_config(args, run_eval, s=args.s, t=args.t, out=args.out)


# ---------------------------------------------------------------------------
# Top-level parser
# ---------------------------------------------------------------------------

DESCRIPTION = """\
qsp - quadratic stochastic processes: build, verify and simulate

Commands:
  list       List every family with its parameter signature
  verify     Check stochasticity and the Kolmogorov-Chapman equation on a grid
  simulate   Evolve a distribution and write the trajectory CSV
  eval       Evaluate the family at one (s, t) and write the matrix

Exit codes: 0 pass, 1 check failed, 2 config or parse error, 3 evaluation error.
The environment variable QSP_DEFAULT_TOL overrides tolerances.kce_tol.
"""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qsp",
        description=DESCRIPTION,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    subparsers = parser.add_subparsers(dest="command")
    _build_list_parser(subparsers)
    _build_verify_parser(subparsers)
    _build_simulate_parser(subparsers)
    _build_eval_parser(subparsers)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command is None:
        parser.print_help()
        return EXIT_OK

    dispatch = {
        "list": _run_list,
        "verify": _run_verify,
        "simulate": _run_simulate,
        "eval": _run_eval,
    }
    handler = dispatch.get(args.command)
    if handler is None:
        parser.print_help()
        return EXIT_CONFIG_ERROR
    return handler(args)
