"""Command line front end for the simulation harness.

Exit codes: 0 on success, 1 for configuration problems, 2 when more
than 20 percent of trials failed at any sweep point.
"""

from __future__ import annotations

import argparse
import sys

from .config import ALGORITHMS, SWEEP_FIELDS, ConfigError, KEY_ALIASES, SystemConfig
from .harness import run_sweep, write_csv

FAILURE_BUDGET = 0.2

_INT_FIELDS = {"M", "T_d", "T_p"}


def _parse_sweep(text: str):
    if "=" not in text:
        raise ConfigError("sweep must look like name=v1,v2,...")
    name, _, values = text.partition("=")
    name = KEY_ALIASES.get(name.strip(), name.strip())
    if name not in SWEEP_FIELDS:
        raise ConfigError(f"cannot sweep {name!r}; choose from {SWEEP_FIELDS}")
    cast = int if name in _INT_FIELDS else float
    try:
        parsed = [cast(v) for v in values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad sweep values {values!r}") from exc
    if not parsed:
        raise ConfigError("sweep needs at least one value")
    return name, parsed


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmep",
        description="Link-level simulation of semi-blind channel "
                    "estimation and detection for multi-cell uplinks.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a Monte Carlo batch or sweep")
    run.add_argument("--config", required=True, help="JSON scenario file")
    run.add_argument("--out", required=True, help="output CSV path")
    run.add_argument("--seed", type=int, default=None,
                     help="override the master seed")
    run.add_argument("--trials", type=int, default=None,
                     help="override the trial count")
    run.add_argument("--sweep", default=None,
                     help="field=v1,v2,... (fields: %s)" % ",".join(SWEEP_FIELDS))
    run.add_argument("--algorithms", default=None,
                     help="comma-separated subset of %s" % ",".join(ALGORITHMS))
    run.add_argument("--workers", type=int, default=1,
                     help="parallel trial processes")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = SystemConfig.from_json(args.config)
        if args.seed is not None:
            cfg = cfg.with_(master_seed=args.seed)
        if args.trials is not None:
            cfg = cfg.with_(trials=args.trials)
        if args.algorithms is not None:
            algs = tuple(a.strip() for a in args.algorithms.split(",") if a.strip())
            cfg = cfg.with_(algorithms=algs)
        if args.sweep is not None:
            name, values = _parse_sweep(args.sweep)
        else:
            name, values = None, None
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    if name is None:
        # single point: reuse the sweep machinery with a degenerate sweep
        rows = run_sweep(cfg, "M", [cfg.M], workers=args.workers)
        for row in rows:
            row.sweep_name = "none"
            row.sweep_value = 0
    else:
        rows = run_sweep(cfg, name, values, workers=args.workers)

    try:
        write_csv(rows, args.out)
    except OSError as exc:
        print(f"cannot write {args.out}: {exc}", file=sys.stderr)
        return 2

    worst = max(row.failures / row.trials for row in rows)
    if worst > FAILURE_BUDGET:
        print(f"failure budget exceeded: {worst:.0%} of trials failed "
              "at some sweep point", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
