"""Command line entry point: ``run``, ``sweep`` and ``validate``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .errors import ConfigError


def _load(args) -> harness.ExperimentSpec:
    spec = harness.ExperimentSpec.from_json(args.config)
    overrides = {}
    if getattr(args, "seeds", None) is not None:
        overrides.update(seeds=args.seeds, seed_list=None)
    if getattr(args, "beta", None) is not None:
        overrides["beta"] = args.beta
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    return replace(spec, **overrides) if overrides else spec


def _out_dir(args, spec) -> Path:
    return Path(args.out or spec.out_dir or harness.default_output_dir())


def _finish(runs, out: Path) -> int:
    failures = harness.failure_report(runs)
    if failures:
        path = out / "failures.json"
        path.write_text(json.dumps(failures, indent=2))
        print(f"invariant failures in {len(failures)} run(s); see {path}", file=sys.stderr)
        return 1
    print(f"{len(runs)} run(s) ok; outputs in {out}")
    return 0


def cmd_run(args) -> int:
    spec = _load(args)
    out = _out_dir(args, spec)
    runs = harness.run_experiment(spec)
    harness.write_outputs(spec, runs, out)
    return _finish(runs, out)


def cmd_sweep(args) -> int:
    spec = _load(args)
    out = _out_dir(args, spec)
    values = [float(v) if args.param != "T" else int(float(v)) for v in args.values.split(",") if v]
    out.mkdir(parents=True, exist_ok=True)
    runs = harness.run_sweep(spec, args.param, values, out)
    return _finish(runs, out)


def cmd_validate(args) -> int:
    spec = _load(args)
    print(json.dumps({**spec.normalized(), "config_hash": spec.config_hash()}, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="collision-mmab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, flags=True):
        p.add_argument("--config", required=True, help="JSON experiment file")
        if flags:
            p.add_argument("--seeds", type=int, help="number of seeds (overrides the config)")
            p.add_argument("--beta", type=float)
            p.add_argument("--workers", type=int, help="parallel worker processes")
            p.add_argument("--out", help=f"output directory (default ${harness.OUTPUT_ENV_VAR} or ./results)")

    run = sub.add_parser("run", help="run every seed of a config")
    common(run)
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="repeat a config over values of one parameter")
    common(sweep)
    sweep.add_argument("--param", required=True, choices=harness.SWEEP_PARAMS)
    sweep.add_argument("--values", required=True, help="comma separated values")
    sweep.set_defaults(func=cmd_sweep)

    validate = sub.add_parser("validate", help="check a config and print it with defaults filled in")
    common(validate, flags=False)
    validate.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OSError) as err:
        print(json.dumps({"error": str(err)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
