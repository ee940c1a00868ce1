#!/usr/bin/env python3
"""
gridchain command line
Run scenarios, verify and audit ledgers, and evaluate oracle services offline.
Exit codes: 0 success, 1 verification or audit failure, 2 usage error
"""

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

import orjson
from colorama import Fore, Style, init
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from gridchain import __version__
from gridchain.errors import (
    ConfigError,
    DecodeError,
    GridchainError,
    OracleServiceError,
    ReplayError,
    TraceFormatError,
)
from gridchain.harness.audit import audit_ledger
from gridchain.harness.config import ScenarioConfig, scenario_schema
from gridchain.harness.reports import ReportBundle
from gridchain.harness.runner import GENESIS_FILE, run
from gridchain.harness.verify import verify_ledger
from gridchain.oracle.service import evaluate_service
from gridchain.utils.logging_config import setup_logging

logger = logging.getLogger(__name__)

# Initialize colorama for colored output
init(autoreset=True)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def _ok(message: str) -> None:
    print(f"{Fore.GREEN}✅ {message}")


def _fail(message: str) -> None:
    print(f"{Fore.RED}❌ {message}")


def _earnings_table(report: ReportBundle) -> Table:
    table = Table(title="Prosumer earnings (milli-currency)")
    for column in ("prosumer", "market", "dr", "vpp", "total"):
        table.add_column(column, justify="left" if column == "prosumer" else "right")
    for row in report.earnings:
        table.add_row(row.prosumer, str(row.market), str(row.dr), str(row.vpp), str(row.total))
    return table


def cmd_run(args: argparse.Namespace) -> int:
    config = ScenarioConfig.load(args.config, seed=args.seed)
    result = run(config, args.out)
    report = result.report

    print(f"{Fore.CYAN}{Style.BRIGHT}{config.scenario} scenario, seed {config.seed}")
    print(
        f"Blocks: {report.chain.blocks}  transactions: {report.chain.transactions}  "
        f"failed: {report.chain.failed_receipts}  clearings: {len(report.clearings)}  "
        f"DR settlements: {len(report.dr_settlements)}  "
        f"VPP settlements: {len(report.vpp_settlements)}"
    )
    if report.earnings:
        Console().print(_earnings_table(report))
    for event in report.events:
        print(f"{Fore.YELLOW}  {event}")

    if not result.converged:
        _fail("validators did not converge")
        return EXIT_FAILED
    if not report.conservation.ok:
        _fail("conservation checks failed")
        return EXIT_FAILED
    _ok(f"run written to {args.out}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    report = verify_ledger(args.ledger, args.genesis)
    if report.ok:
        _ok(f"{report.blocks_verified} blocks verified, tip {report.tip_height}, "
            f"state root {report.state_root}")
        return EXIT_OK
    _fail(f"verification failed at height {report.failure_height}: {report.reason} "
          f"({report.blocks_verified} blocks verified before it)")
    return EXIT_FAILED


def cmd_audit(args: argparse.Namespace) -> int:
    genesis = args.genesis or Path(args.ledger).parent / GENESIS_FILE
    try:
        report = audit_ledger(args.ledger, genesis)
    except (ReplayError, DecodeError) as e:
        _fail(f"chain is invalid, run verify first: {e}")
        return EXIT_FAILED

    checked = ", ".join(f"{count} {name.replace('_', ' ')}" for name, count in report.checked.items())
    if report.ok:
        _ok(f"no discrepancies ({checked})")
        return EXIT_OK
    table = Table(title=f"{len(report.discrepancies)} discrepancies")
    for column in ("check", "location", "detail"):
        table.add_column(column)
    for item in report.discrepancies:
        table.add_row(item.check, item.location, item.detail)
    Console().print(table)
    return EXIT_FAILED


def cmd_oracle_eval(args: argparse.Namespace) -> int:
    raw = sys.stdin.buffer.read() if args.input == "-" else Path(args.input).read_bytes()
    try:
        payload = orjson.loads(raw)
    except orjson.JSONDecodeError as e:
        _fail(f"input is not valid JSON: {e}")
        return EXIT_USAGE
    try:
        result = evaluate_service(args.service, payload)
    except ValidationError as e:
        _fail(f"invalid {args.service} input:\n{e}")
        return EXIT_USAGE
    except OracleServiceError as e:
        _fail(f"{args.service} failed: {e}")
        return EXIT_FAILED
    print(orjson.dumps(result, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS).decode())
    return EXIT_OK


def cmd_schema(args: argparse.Namespace) -> int:
    data = orjson.dumps(scenario_schema(), option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS)
    if args.out:
        Path(args.out).write_bytes(data + b"\n")
        _ok(f"schema written to {args.out}")
    else:
        print(data.decode())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridchain", description=__doc__.splitlines()[2])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", help="Override GRIDCHAIN_LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="Run a scenario")
    run_parser.add_argument("--config", required=True, type=Path)
    run_parser.add_argument("--seed", type=int, help="Override the config seed")
    run_parser.add_argument("--out", required=True, type=Path)
    run_parser.set_defaults(handler=cmd_run)

    verify_parser = commands.add_parser("verify", help="Replay and validate a ledger")
    verify_parser.add_argument("--ledger", required=True, type=Path)
    verify_parser.add_argument("--genesis", required=True, type=Path)
    verify_parser.set_defaults(handler=cmd_verify)

    audit_parser = commands.add_parser("audit", help="Recompute settlements from chain data")
    audit_parser.add_argument("--ledger", required=True, type=Path)
    audit_parser.add_argument("--genesis", type=Path, help="Defaults to genesis.json beside the ledger")
    audit_parser.set_defaults(handler=cmd_audit)

    eval_parser = commands.add_parser("oracle-eval", help="Evaluate an oracle service offline")
    eval_parser.add_argument(
        "--service", required=True, choices=["forecast", "clear", "flex", "coalition", "baseline"]
    )
    eval_parser.add_argument("--input", required=True, help="JSON file, or - for stdin")
    eval_parser.set_defaults(handler=cmd_oracle_eval)

    schema_parser = commands.add_parser("schema", help="Print the scenario config JSON Schema")
    schema_parser.add_argument("--out", type=Path)
    schema_parser.set_defaults(handler=cmd_schema)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    if getattr(args, "seed", None) is not None and args.seed < 0:
        parser.error("--seed must be non-negative")
    try:
        return args.handler(args)
    except (ConfigError, TraceFormatError) as e:
        _fail(str(e))
        return EXIT_USAGE
    except (ValidationError, orjson.JSONDecodeError) as e:
        _fail(f"unreadable input: {e}")
        return EXIT_USAGE
    except OSError as e:
        _fail(f"cannot access {e.filename}: {e.strerror}")
        return EXIT_USAGE
    except GridchainError as e:
        logger.error(f"{args.command} failed: {e}")
        _fail(str(e))
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
