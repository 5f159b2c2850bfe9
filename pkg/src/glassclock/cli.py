"""Command-line front end: `glassclock run` and `glassclock report`."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import (
    EXPERIMENTS,
    config_from_dict,
    run_experiment,
    write_outputs,
)
from .report import report as render_report

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glassclock",
        description=(
            "Monte Carlo laboratory for hopping dynamics on the hypercube: "
            "runs replicate sweeps and renders their statistics."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one experiment from a config")
    run_p.add_argument("--config", required=True, help="JSON config file")
    run_p.add_argument(
        "--seed", type=int, default=None, help="master seed (overrides config)"
    )
    run_p.add_argument(
        "--out", default=None, help="output directory (overrides config)"
    )
    run_p.add_argument(
        "--threads", type=int, default=1, help="worker processes for replicates"
    )
    run_p.add_argument(
        "--experiment",
        default=None,
        choices=EXPERIMENTS,
        help="experiment name (overrides config)",
    )

    rep_p = sub.add_parser("report", help="summarize a finished run directory")
    rep_p.add_argument("--in", dest="in_dir", required=True, help="run directory")
    rep_p.add_argument(
        "--no-figures", action="store_true", help="skip PNG rendering"
    )
    return parser


def _cmd_run(args) -> int:
    raw = json.loads(Path(args.config).read_text())
    if not isinstance(raw, dict):
        print("config must be a JSON object", file=sys.stderr)
        return 2
    if args.seed is not None:
        raw["master_seed"] = args.seed
    if args.experiment is not None:
        raw["experiment"] = args.experiment
    if args.out is not None:
        raw["out_dir"] = args.out
    config = config_from_dict(raw)
    if config.out_dir is None:
        print("no output directory: pass --out or set out_dir", file=sys.stderr)
        return 2
    results = run_experiment(config, threads=max(args.threads, 1))
    manifest = write_outputs(config, results, config.out_dir)
    n_rows = sum(1 for r in results if hasattr(r, "params"))
    print(
        f"{config.experiment}: {n_rows} rows -> {config.out_dir} "
        f"(config {manifest['config_hash'][:12]}, seed {config.master_seed})"
    )
    return 0


def _cmd_report(args) -> int:
    text = render_report(args.in_dir, figures=not args.no_figures)
    print(text)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_report(args)


if __name__ == "__main__":
    sys.exit(main())
