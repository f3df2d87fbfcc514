from __future__ import annotations

import argparse
from enum import Enum
from pathlib import Path
from typing import Sequence


class Command(Enum):
    Solve = "solve"
    Convergence = "convergence"
    Info = "info"


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("-c", "--config", dest="config", type=Path, required=True,
                        help="The run file (YAML)")
    parser.add_argument("--order", dest="order", type=int,
                        help="Quadrature points per element and direction")
    parser.add_argument("--eta", dest="eta", type=float,
                        help="Admissibility factor of the local correction")
    parser.add_argument("--seed", dest="seed", type=int,
                        help="Reserved; runs are deterministic")
    parser.add_argument("-v", "--verbose", dest="verbose", action="count", default=0,
                        help="Log progress (-v) or details (-vv)")


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isonystrom",
        description="Locally corrected Nystrom solver on NURBS boundaries")
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    solve = commands.add_parser(Command.Solve.value, help="Solve the first step of a run file")
    _add_common(solve)
    solve.add_argument("-o", "--out", dest="out", type=Path,
                       help="CSV file for the result row (default: stdout)")
    solve.add_argument("--density", dest="density", type=Path,
                       help="CSV file for the interpolated boundary data")

    convergence = commands.add_parser(Command.Convergence.value, help="Run a refinement sweep")
    _add_common(convergence)
    convergence.add_argument("-o", "--out", dest="out", type=Path,
                             help="CSV file for the convergence record (default: the run file's output, or stdout)")
    convergence.add_argument("--mode", dest="mode", choices=["h", "p"],
                             help="Refine elements (h) or quadrature order (p)")
    convergence.add_argument("--steps", dest="steps", type=int,
                             help="Number of refinement steps after the first")
    convergence.add_argument("--cache", dest="cache", type=Path,
                             help="Directory caching finished steps")

    info = commands.add_parser(Command.Info.value, help="Describe a run file")
    _add_common(info)

    return parser


class ArgNamespace(argparse.Namespace):
    command: str
    config: Path
    order: int | None
    eta: float | None
    seed: int | None
    verbose: int
    out: Path | None
    density: Path | None
    mode: str | None
    steps: int | None
    cache: Path | None


def parse_args(args: Sequence[str] | None = None) -> ArgNamespace:
    namespace = create_parser().parse_args(args, namespace=ArgNamespace())
    for name in ("out", "density", "mode", "steps", "cache"):
        if not hasattr(namespace, name):
            setattr(namespace, name, None)
    return namespace
