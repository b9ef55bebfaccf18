"""Command-line entry point.

    smallmass <command> [--config cfg.json] [--seed N] [--threads N]
                        [--out DIR] [--format csv|json]

Commands: validate, simulate, converge, ablate, lemmas, momentum.  Exit
codes: 0 success, 1 configuration error, 2 numerical failure; errors print
a one-line diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import ExperimentConfig
from .errors import ConfigError, NumericalError
from .experiments import (
    run_ablation,
    run_convergence,
    run_lemma_checks,
    run_momentum_diagnostic,
    run_simulation,
)
from .model import make_preset, validate_model

_COMMANDS = {
    "validate": "check the configured model preset against its structural assumptions",
    "simulate": "run the kinetic system and export binned mass/momentum fields",
    "converge": "small-mass convergence study against the overdamped variants",
    "ablate": "paired drift-ablation comparison at the smallest mass",
    "lemmas": "moment and Hölder estimates plus the frozen-velocity residual order",
    "momentum": "window-averaged momentum diagnostic",
}

_RUNNERS = {
    "simulate": run_simulation,
    "converge": run_convergence,
    "ablate": run_ablation,
    "lemmas": run_lemma_checks,
    "momentum": run_momentum_diagnostic,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="smallmass",
        description="Simulation harness for an interacting particle system "
        "with common noise and its overdamped limit candidates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in _COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", metavar="PATH", default=None,
                        help="JSON config file (defaults apply when omitted)")
        sp.add_argument("--seed", type=int, default=None,
                        help="root seed, overrides the config value")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker processes (default: config, then "
                        "SMALLMASS_THREADS, then 1)")
        sp.add_argument("--out", metavar="DIR", default=None,
                        help="output directory, overrides the config value")
        sp.add_argument("--format", choices=("csv", "json"), default=None,
                        help="output format, overrides the config value")
    return parser


def _load_config(args):
    if args.config is not None:
        cfg = ExperimentConfig.from_json_file(args.config)
    else:
        cfg = ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.format is not None:
        overrides["format"] = args.format
    return cfg.replace(**overrides) if overrides else cfg


def _run_validate(cfg):
    model = make_preset(cfg.preset)
    report = validate_model(model, seed=cfg.seed)
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, "validation.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    print(path)
    if not report.passed:
        failed = [c.name for c in report.checks if not c.passed]
        raise ConfigError(
            f"model {cfg.preset!r} failed validation checks: {', '.join(failed)}"
        )


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for usage errors; usage errors
        # are configuration errors under this tool's contract.
        return 0 if exc.code in (0, None) else 1
    try:
        cfg = _load_config(args)
        if args.command == "validate":
            _run_validate(cfg)
        else:
            report = _RUNNERS[args.command](cfg)
            for path in report.write(cfg.out_dir, cfg.format):
                print(path)
        return 0
    except ConfigError as exc:
        print(f"smallmass: config error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"smallmass: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
