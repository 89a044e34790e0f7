"""Command line interface.

Verbs: ``simulate``, ``fit-full``, ``fit-distributed``, ``combine``,
``metrics`` and ``report``. Every verb takes ``--config FILE`` plus one flag
per configuration key; flags override the file, which overrides defaults.
On failure a single JSON line ``{"error": ..., "type": ...}`` goes to stderr
and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .errors import ChainError, DvcmError
from .runner import (
    RunConfig,
    load_config,
    report_table,
    run_combine,
    run_distributed,
    run_full,
    run_metrics,
    run_simulate,
)

VERBS = {
    "simulate": "simulate",
    "fit-full": "full",
    "fit-distributed": "distributed",
    "combine": "combine",
    "metrics": "metrics",
    "report": "metrics",
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value configuration file")
    for f in dataclasses.fields(RunConfig):
        if f.name == "mode":
            continue
        flag = "--" + f.name.replace("_", "-")
        kind = {"int": int, "float": float}.get(f.type, str)
        if f.type == "bool":
            parser.add_argument(flag, dest=f.name, default=None, choices=("true", "false"))
        else:
            parser.add_argument(flag, dest=f.name, type=kind, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dvcm", description="Distributed Bayesian varying coefficient models")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        p = sub.add_parser(verb)
        _add_config_flags(p)
        if verb in ("combine", "metrics", "report"):
            p.add_argument("run_dir", nargs="?", help="existing run directory (default: --output)")
    return parser


def _overrides(ns) -> dict:
    out = {}
    for f in dataclasses.fields(RunConfig):
        v = getattr(ns, f.name, None)
        if v is None:
            continue
        out[f.name] = (v == "true") if f.type == "bool" else v
    return out


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        config = load_config(ns.config, _overrides(ns), mode=VERBS[ns.verb])
        if ns.verb == "simulate":
            result = {"output": str(run_simulate(config))}
        elif ns.verb == "fit-full":
            result = {"output": str(run_full(config))}
        elif ns.verb == "fit-distributed":
            result = {"output": str(run_distributed(config))}
        elif ns.verb == "combine":
            result = {"output": str(run_combine(config, ns.run_dir))}
        elif ns.verb == "metrics":
            result = run_metrics(config, ns.run_dir)
        else:
            sys.stdout.write(report_table(ns.run_dir or config.output))
            return 0
        print(json.dumps(result, sort_keys=True))
        return 0
    except (DvcmError, OSError, ValueError) as exc:
        err = {"error": str(exc), "type": type(exc).__name__}
        if isinstance(exc, ChainError):
            err.update(subset_id=exc.subset_id, iteration=exc.iteration)
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
