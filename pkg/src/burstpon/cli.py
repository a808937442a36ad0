"""Command line front end.

    burstpon run      [--config PATH] [--seed N] [--out DIR] [--set key=value ...]
    burstpon sweep    [--config PATH] [--seed N] [--jobs N] [--out DIR] [--set ...]
    burstpon figure   {fig2d,fig3a,fig3c,fig4c} [...]
    burstpon selftest

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict

from . import config as config_mod
from . import selftest
from .harness import FIGURES, ConfigError, emit_outputs, figure_preset, run_sweep, run_trial

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML config file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--jobs", type=int, help="worker processes")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override one dotted config key (repeatable)")

    p = _Parser(prog="burstpon", description="Burst-mode coherent PON upstream simulator.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", parents=[common], help="one trial, metrics to stdout")
    run.add_argument("--trial", type=int, default=0, help="trial index within the seed")
    sub.add_parser("sweep", parents=[common], help="grid over sweep.axis, writes CSVs")
    fig = sub.add_parser("figure", parents=[common], help="canned sweep producing plot data")
    fig.add_argument("name", choices=FIGURES)
    sub.add_parser("selftest", parents=[common], help="quick property checks")
    return p


def _resolve(args) -> config_mod.RunConfig:
    run = config_mod.load(args.config, args.overrides)
    run = config_mod.with_seed(run, args.seed)
    if args.jobs is not None:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        run.jobs = args.jobs
    if args.out is not None:
        run.out = args.out
    return run


def _json_safe(d: dict) -> dict:
    return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}


def cmd_run(args, run: config_mod.RunConfig) -> int:
    records = run_trial(run.trial, args.trial)
    for m in records:
        print(json.dumps(_json_safe(asdict(m))))
    if args.out is not None:
        emit_outputs(records, run.out, run.trial)
    return EXIT_OK if all(m.ok for m in records) else EXIT_RUNTIME


def cmd_sweep(args, run: config_mod.RunConfig) -> int:
    sw = run.sweep
    if not sw.axis or not sw.values:
        raise ConfigError("sweep needs sweep.axis and sweep.values")
    table = run_sweep(run.trial, sw.axis, sw.values, sw.trials, run.jobs)
    paths = emit_outputs(table, run.out, run.trial)
    for row in table.summary():
        print(f"{sw.axis}={row[sw.axis]:g} records={row['records']} failed={row['failed']} "
              f"ber={row['ber_total_mean']:.3e}")
    print("wrote " + ", ".join(str(p) for p in paths))
    return EXIT_OK


def cmd_figure(args, run: config_mod.RunConfig) -> int:
    rows, table = figure_preset(args.name, run.trial, run.sweep.trials, run.jobs)
    paths = emit_outputs(table if table is not None else [], run.out, run.trial,
                         figure=args.name, figure_rows=rows, extra={"trials_per_point": run.sweep.trials})
    print("wrote " + ", ".join(str(p) for p in paths))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "selftest":
            return EXIT_OK if selftest.run() else EXIT_RUNTIME
        run = _resolve(args)
        handler = {"run": cmd_run, "sweep": cmd_sweep, "figure": cmd_figure}[args.command]
        return handler(args, run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
