"""Command-line experiment runner.

Subcommands: toy1d | wavelet-deblur | tv-denoise | tv-deblur |
poisson-deblur | prox-check. Each reads an optional flat key-value
config file (or a previous run's manifest.json), applies --set overrides
and the --seed/--samples shortcuts, runs the experiment and writes its
artifacts (CSV tables, PNGs, raw dumps, figures, manifest) into --out.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, SCHEMAS, config_from_manifest, parse_kv_file, resolve_config
from .experiments import RUNNERS
from .sampler import ProxFailure

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog="proxlangevin",
        description="Langevin posterior sampling with inexact proximal steps",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name, schema in SCHEMAS.items():
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", type=Path, default=None,
                       help="key=value config file or a manifest.json")
        p.add_argument("--seed", type=int, default=None, help="override seed")
        p.add_argument("--samples", type=int, default=None,
                       help="override n_samples" if "n_samples" in schema
                       else "override n_cases")
        p.add_argument("--out", type=Path, default=Path("results") / name,
                       help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       dest="overrides", help="override one config key")
    return parser


def _collect_overrides(args, experiment):
    overrides = {}
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.samples is not None:
        key = "n_samples" if "n_samples" in SCHEMAS[experiment] else "n_cases"
        overrides[key] = str(args.samples)
    return overrides


def main(argv=None):
    args = build_parser().parse_args(argv)
    experiment = args.experiment
    try:
        file_values = {}
        if args.config is not None:
            if args.config.suffix == ".json":
                manifest_experiment, file_values = config_from_manifest(args.config)
                if manifest_experiment != experiment:
                    raise ConfigError(
                        f"manifest is for {manifest_experiment!r}, "
                        f"not {experiment!r}"
                    )
            else:
                file_values = parse_kv_file(args.config)
        cfg = resolve_config(experiment, file_values,
                             _collect_overrides(args, experiment))
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    try:
        summary = RUNNERS[experiment](cfg, out)
    except ProxFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    if experiment == "prox-check" and summary["failures"]:
        print(
            f"prox-check: {summary['failures']} of {summary['rows']} "
            f"endpoint cases violated their accuracy contract",
            file=sys.stderr,
        )
        return EXIT_NUMERICAL
    print(f"{experiment}: artifacts written to {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
