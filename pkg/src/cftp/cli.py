"""Command-line entry point.

Subcommands mirror the experiment runners: ``sample`` (replicated coupling
runs), ``figure1`` (contraction curve + coalescence histogram on one record),
``table1`` (dependence decay + two-step sampler timing), ``diagnose``
(ergodicity report).  Flags override the matching config fields.  Exit code 2
signals a config problem, 1 a runtime failure, 0 success.
"""

from __future__ import annotations

import argparse
import json
import sys

from cftp.experiments.config import load_config
from cftp.experiments.runner import cmd_diagnose, cmd_figure1, cmd_sample, cmd_table1
from cftp.hmm import ObservationExhaustedError

_COMMANDS = {
    "sample": cmd_sample,
    "figure1": cmd_figure1,
    "table1": cmd_table1,
    "diagnose": cmd_diagnose,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cftp",
        description="Exact sampling for finite-state signals by backward coupling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, runner in _COMMANDS.items():
        p = sub.add_parser(name, help=runner.__doc__.splitlines()[0].lower())
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--replicates", type=int, default=None, help="override replicate count")
        p.add_argument("--cutoff", type=int, default=None, help="override backward-step cutoff")
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument("--workers", type=int, default=None, help="override worker count")
        p.add_argument(
            "--no-plots", action="store_true", help="skip figure rendering, write CSV/JSON only"
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(
            args.config,
            overrides={
                "seed": args.seed,
                "replicates": args.replicates,
                "cutoff": args.cutoff,
                "out_dir": args.out,
                "workers": args.workers,
            },
        )
    except (OSError, ValueError, json.JSONDecodeError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2

    runner = _COMMANDS[args.command]
    try:
        result = runner(config, render_plots=not args.no_plots)
    except ObservationExhaustedError as err:
        print(f"data exhausted: {err}", file=sys.stderr)
        return 1
    except ValueError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    for kind, path in sorted(result.paths.items()):
        print(f"{kind}: {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
