"""Command line entry point.

    plasticflow simulate CONFIG
    plasticflow sweep CONFIG
    plasticflow rushhour CONFIG
    plasticflow overshoot --capacity C [--max-steps N]
    plasticflow topo CONFIG

CSV files go to the config's ``output_dir`` (relative to the working
directory) unless PLASTICFLOW_OUTPUT_DIR is set.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from plasticflow import analysis, scenarios
from plasticflow.config import parse_config
from plasticflow.errors import PlasticFlowError
from plasticflow.topology import graph_stats

OUTPUT_ENV = "PLASTICFLOW_OUTPUT_DIR"


def output_dir(configured: str | None) -> Path:
    return Path(os.environ.get(OUTPUT_ENV) or configured or "results")


def overshoot_rows(capacity: int, max_steps: int):
    for row in analysis.overshoot_table(capacity, max_steps):
        yield (row.rule, row.parameter_set, row.ki, row.kd, row.analytic, row.simulated, row.n)


def emit_overshoot_table(capacity: int, max_steps: int = 100_000) -> str:
    return scenarios.csv_text(scenarios.OVERSHOOT_HEADER, overshoot_rows(capacity, max_steps))


def _cmd_config(args, action) -> int:
    config = parse_config(args.config)
    out = output_dir(config.output_dir)
    for path in action(config, out):
        print(path)
    return 0


def _cmd_overshoot(args) -> int:
    text = emit_overshoot_table(args.capacity, args.max_steps)
    out = output_dir(None) / f"overshoot_C{args.capacity}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    sys.stdout.write(text)
    return 0


def _cmd_topo(args) -> int:
    config = parse_config(args.config)
    seeds = scenarios.repeat_seeds(config.seed, 0)
    stats = graph_stats(scenarios.build_topology(config, seeds.topology))
    text = scenarios.csv_text(("stat", "value"), stats.items())
    out = output_dir(config.output_dir) / "topology.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plasticflow", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, action in (
        ("simulate", scenarios.simulate),
        ("sweep", scenarios.sweep),
        ("rushhour", scenarios.rush_hour),
    ):
        p = sub.add_parser(name)
        p.add_argument("config", type=Path)
        p.set_defaults(func=lambda a, action=action: _cmd_config(a, action))
    p = sub.add_parser("overshoot")
    p.add_argument("--capacity", type=int, required=True)
    p.add_argument("--max-steps", type=int, default=100_000)
    p.set_defaults(func=_cmd_overshoot)
    p = sub.add_parser("topo")
    p.add_argument("config", type=Path)
    p.set_defaults(func=_cmd_topo)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PlasticFlowError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
