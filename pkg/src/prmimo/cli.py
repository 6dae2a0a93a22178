"""Command-line entry point: one subcommand per experiment.

    prmimo capacity-cdf --realizations 2000 --out cdf.csv
    prmimo run --experiment hsmrt-ser --config ser.json --seed 7

Values come from the experiment preset, then the JSON config file, then
command-line flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bruteforce import BruteForceError
from .experiments import EXPERIMENTS, ConfigError, ExperimentConfig, run_experiment


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields")
    p.add_argument("--seed", type=int)
    p.add_argument("--realizations", type=int)
    p.add_argument("--workers", type=int, help="worker processes (results do not depend on it)")
    p.add_argument("--out", help="CSV output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prmimo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment named by --experiment")
    run.add_argument("--experiment", choices=EXPERIMENTS)
    _common(run)
    for name in EXPERIMENTS:
        _common(sub.add_parser(name, help=f"run the {name} experiment"))
    sub.add_parser("list", help="list experiments and their preset configs")
    return parser


def make_config(args: argparse.Namespace) -> ExperimentConfig:
    data = {}
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config JSON must be an object")
    experiment = args.command if args.command != "run" else args.experiment
    if experiment is not None:
        if "experiment" in data and data["experiment"] != experiment:
            raise ConfigError(f"config names {data['experiment']!r} but {experiment!r} was requested")
        data["experiment"] = experiment
    return ExperimentConfig.from_dict(
        data, seed=args.seed, realizations=args.realizations, workers=args.workers, output_path=args.out
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "list":
        for name in EXPERIMENTS:
            print(name, json.dumps(ExperimentConfig.preset(name).to_dict(), sort_keys=True))
        return 0
    try:
        cfg = make_config(args)
        table = run_experiment(cfg)
    except (ConfigError, BruteForceError, TypeError) as exc:
        print(f"prmimo: error: {exc}", file=sys.stderr)
        return 2
    if cfg.output_path is None:
        sys.stdout.write(table.to_csv())
    else:
        print(f"wrote {len(table.rows)} rows to {cfg.output_path}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
