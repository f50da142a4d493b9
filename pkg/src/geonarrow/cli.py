"""Command line entry point: ``geonarrow run|sweep|verify|compare-static``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import harness
from .harness import ConfigError, ExperimentConfig


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=True) + "\n"


def _outdir(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write(p: Path | None, name: str, text: str) -> None:
    if p is None:
        sys.stdout.write(text)
    else:
        (p / name).write_text(text)


def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    lines = harness.run_records(cfg, args.workers, harness.seed_offset(args.seed_offset))
    _write(_outdir(args.out), "runs.jsonl", "".join(line + "\n" for line in lines))
    return 0


def cmd_sweep(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if len(set(cfg.T)) < 3:
        raise ConfigError("sweep needs at least 3 distinct T values")
    lines = harness.run_records(cfg, args.workers, harness.seed_offset(args.seed_offset))
    summary = harness.summarize([json.loads(line) for line in lines])
    out = _outdir(args.out)
    if out is not None:
        _write(out, "runs.jsonl", "".join(line + "\n" for line in lines))
        _write(out, "summary.csv", harness.rows_to_csv(summary["rows"]))
    _write(out, "summary.json", _dump(summary))
    return 0


def cmd_compare_static(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    res = harness.compare_static(cfg, args.workers, harness.seed_offset(args.seed_offset))
    out = _outdir(args.out)
    if out is not None:
        _write(out, "compare.csv", harness.rows_to_csv(res["rows"], harness.COMPARE_COLUMNS))
    _write(out, "compare.json", _dump(res))
    return 0


def cmd_verify(args) -> int:
    reports = harness.verify(args.scope)
    failed = [r for r in reports if not r["pass"]]
    doc = {"scope": args.scope, "checked": len(reports), "failed": len(failed), "reports": reports}
    _write(_outdir(args.out), "verify.json", _dump(doc))
    if failed:
        print(f"{len(failed)} of {len(reports)} properties failed", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geonarrow", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_config=True):
        if needs_config:
            sp.add_argument("--config", required=True, help="experiment config (JSON)")
        sp.add_argument("--out", help="output directory (default: print to stdout)")
        sp.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="worker processes")
        sp.add_argument("--seed-offset", type=int, default=None,
                        help=f"added to every seed (default: ${harness.SEED_ENV} or 0)")

    common(sub.add_parser("run", help="one JSON line per (T, seed) cell"))
    common(sub.add_parser("sweep", help="runs plus per-T aggregates and the log-log regret slope"))
    common(sub.add_parser("compare-static", help="adaptive vs static grid, paired by seed"))
    for name in ("verify", "verify-lb"):
        sp = sub.add_parser(name, help="deterministic property checks; nonzero exit on failure")
        common(sp, needs_config=False)
        if name == "verify":
            sp.add_argument("--scope", choices=("instances", "lowerbound", "ls", "all"), default="all")
        else:
            sp.set_defaults(scope="lowerbound")
    return p


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "compare-static": cmd_compare_static,
            "verify": cmd_verify, "verify-lb": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
