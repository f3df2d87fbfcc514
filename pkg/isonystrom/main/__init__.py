from __future__ import annotations

import logging
from pathlib import Path
import sys
from typing import Sequence

from .parser import ArgNamespace, Command, parse_args
from .. import shapes  # noqa: F401
from ..config import RunConfig, Sweep
from ..errors import IsoNystromError
from ..harness import ConvergenceRecord, describe, run_convergence, solve_step, write_density, write_record
from ..store import Store

LOG_LEVELS = {0: logging.WARNING, 1: logging.INFO}


def setup_logging(verbose: int):
    logging.basicConfig(
        level=LOG_LEVELS.get(verbose, logging.DEBUG),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr)


def load_config(args: ArgNamespace) -> RunConfig:
    config = RunConfig.from_file(args.config)
    if args.order is not None:
        config.order = args.order
    if args.eta is not None:
        config.eta = args.eta
    if args.mode is not None or args.steps is not None:
        sweep = config.sweep
        config.sweep = Sweep(
            args.mode if args.mode is not None else sweep.mode,
            args.steps if args.steps is not None else sweep.steps,
            sweep.orders if args.mode in (None, "p") else None)
    if args.cache is not None:
        config.store = Store(args.cache)
    return config


def _output(args: ArgNamespace, config: RunConfig) -> Path | None:
    if args.out is not None:
        return args.out
    if config.output is not None:
        return args.config.parent / config.output
    return None


def run(args: ArgNamespace) -> int:
    config = load_config(args)
    command = Command(args.command)

    if command is Command.Info:
        for line in describe(config):
            print(line)
        return 0

    if command is Command.Solve:
        output = solve_step(config, 0)
        record = ConvergenceRecord(config.sweep.mode, [output.result])
        write_record(record, args.out, sys.stdout)
        if args.density is not None:
            with open(args.density, "w", newline="") as f:
                write_density(output, f)
            print(f"Wrote boundary data to {args.density}", file=sys.stderr)
        return 0

    record = run_convergence(config)
    out = _output(args, config)
    write_record(record, out, sys.stdout)
    # keep stdout clean when it carries the CSV
    report = sys.stdout if out is not None else sys.stderr
    if out is not None:
        print(f"Wrote {len(record.rows)} rows to {out}", file=report)
    failed = [r for r in record.rows if not r.ok]
    for r in failed:
        print(f"Step {r.step} failed: {r.error}", file=sys.stderr)
    if record.mode == "h":
        print(f"Fitted slope: {record.fit_slope:.3f}", file=report)
    else:
        print(f"Fitted C = {record.fit_C:.4g}, s = {record.fit_s:.3f} (residual {record.fit_residual:.3g})", file=report)
    return 1 if failed else 0


def main(argv: Sequence[str] | None = None) -> int:
    args = parse_args(argv)
    setup_logging(args.verbose)
    try:
        return run(args)
    except IsoNystromError as e:
        print(f"isonystrom: error: {e}", file=sys.stderr)
        return 1
