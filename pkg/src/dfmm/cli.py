"""Command-line entry point.

Commands: validate a scenario config, run a scenario, sweep a parameter
grid, and inspect run output. Exit codes are stable: 0 success, 2
validation failure, 3 runtime invariant breach (logs preserved), 4 I/O
or corruption. The DFMM_OUTPUT_ROOT environment variable sets the
default output root (default ./runs).
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from .errors import CorruptManifest, EngineError, ParseError, UnknownLogKind
from .sim.config import SWEEPABLE, ScenarioConfig, apply_overrides, load_config
from .sim.engine import Engine
from .sim.output import read_log, read_manifest, write_logs

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BREACH = 3
EXIT_IO = 4


def _default_out(config_path: str, seed: int) -> str:
    root = os.environ.get("DFMM_OUTPUT_ROOT", "runs")
    stem = os.path.splitext(os.path.basename(config_path))[0]
    return os.path.join(root, f"{stem}_seed{seed}")


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    violations = cfg.validate()
    if violations:
        for v in violations:
            print(f"violation: {v}")
        return EXIT_VALIDATION
    print("ok")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, seed_override=args.seed)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    violations = cfg.validate()
    if violations:
        for v in violations:
            print(f"violation: {v}", file=sys.stderr)
        return EXIT_VALIDATION
    outdir = args.out or _default_out(args.config, cfg.seed)
    started = time.monotonic()
    artifacts = Engine(cfg).run()
    artifacts.summary["duration_seconds"] = round(time.monotonic() - started, 6)
    try:
        write_logs(artifacts, outdir)
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {outdir}")
    if artifacts.summary["halted"]:
        print(f"invariant breach: {artifacts.summary['diagnostic']}", file=sys.stderr)
        return EXIT_BREACH
    return EXIT_OK


def _grid_points(spec: str) -> list[dict]:
    """Expand 'a=1,2;b=x,y' into the cross product of overrides."""
    defaults = ScenarioConfig()
    axes = []
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ParseError(f"grid axis {part!r} is not key=v1,v2,...")
        key, _, values = part.partition("=")
        key = key.strip()
        if key not in SWEEPABLE:
            raise ParseError(f"unknown sweep parameter {key!r}")
        caster = type(getattr(defaults, key))
        parsed = []
        for raw in values.split(","):
            raw = raw.strip()
            if caster is bool:
                parsed.append(raw.lower() in ("true", "1", "yes", "on"))
            else:
                parsed.append(caster(raw))
        axes.append((key, parsed))
    points: list[dict] = [{}]
    for key, values in axes:
        points = [dict(p, **{key: v}) for p in points for v in values]
    return points


def _sweep_seed(base_seed: int, index: int) -> int:
    digest = hashlib.sha256(f"{base_seed}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _sweep_worker(payload):
    index, cfg, overrides = payload
    try:
        artifacts = Engine(cfg).run()
        summary = artifacts.summary
        return (index, overrides, summary, None)
    except EngineError as exc:
        return (index, overrides, None, str(exc))


def cmd_sweep(args) -> int:
    try:
        base = load_config(args.config)
        points = _grid_points(args.grid)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    violations = base.validate()
    if violations:
        for v in violations:
            print(f"violation: {v}", file=sys.stderr)
        return EXIT_VALIDATION

    jobs = []
    for index, overrides in enumerate(points):
        cfg = apply_overrides(base, overrides)
        cfg = apply_overrides(cfg, {})  # no-op keeps type symmetric
        from dataclasses import replace

        cfg = replace(cfg, seed=_sweep_seed(base.seed, index))
        bad = cfg.validate()
        if bad:
            jobs.append((index, None, overrides, "; ".join(bad)))
        else:
            jobs.append((index, cfg, overrides, None))

    results = {}
    runnable = [(i, cfg, ov) for i, cfg, ov, err in jobs if cfg is not None]
    if args.jobs > 1 and len(runnable) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for index, overrides, summary, err in pool.map(_sweep_worker, runnable):
                results[index] = (overrides, summary, err)
    else:
        for payload in runnable:
            index, overrides, summary, err = _sweep_worker(payload)
            results[index] = (overrides, summary, err)
    for index, _cfg, overrides, err in jobs:
        if err is not None:
            results[index] = (overrides, None, err)

    keys = sorted({k for p in points for k in p})
    header = ["point"] + keys + [
        "fills", "final_treasury", "max_utilisation", "liquidations",
        "min_solvency_margin", "status",
    ]
    print(",".join(header))
    for index in range(len(points)):
        overrides, summary, err = results[index]
        cells = [str(index)] + [repr(overrides.get(k, "")) for k in keys]
        if summary is None:
            cells += ["", "", "", "", "", f"error: {err}"]
        else:
            status = "breach" if summary["halted"] else "ok"
            cells += [
                str(summary["fills"]),
                repr(summary["final_treasury"]),
                repr(summary["max_utilisation"]),
                str(summary["liquidations"]),
                repr(summary["min_solvency_margin"]),
                status,
            ]
        print(",".join(cells))
    return EXIT_OK


def _row_time(header, row):
    for i, name in enumerate(header):
        if name in ("timestep", "time", "epoch", "slot_id"):
            try:
                return float(row[i])
            except ValueError:
                return None
    return None


def _row_asset_match(header, row, asset: str) -> bool:
    for i, name in enumerate(header):
        if name in ("asset", "context"):
            return row[i] == asset or row[i] == "*"
        if name == "pair":
            return asset in row[i].replace("->", ",").split(",")
    return True


def cmd_inspect(args) -> int:
    try:
        read_manifest(args.outdir)
        header, rows = read_log(args.outdir, args.log)
    except (CorruptManifest, UnknownLogKind) as exc:
        print(f"inspect error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(",".join(header))
    for row in rows:
        if args.asset and not _row_asset_match(header, row, args.asset):
            continue
        if args.time_from is not None or args.time_to is not None:
            t = _row_time(header, row)
            if t is None:
                continue
            if args.time_from is not None and t < args.time_from:
                continue
            if args.time_to is not None and t > args.time_to:
                continue
        print(",".join(row))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dfmm",
        description="Dynamic-function market maker scenario engine.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario config file")
    p.add_argument("config")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("run", help="run a scenario and write logs + manifest")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep", help="run a parameter grid")
    p.add_argument("config")
    p.add_argument("--grid", required=True, help="e.g. 'k=1,2,3;theta=0.001,0.003'")
    p.add_argument("--jobs", type=int, default=1, help="parallel processes")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("inspect", help="print filtered rows from a run log")
    p.add_argument("outdir")
    p.add_argument("--log", required=True, help="log kind, e.g. trades, treasury")
    p.add_argument("--asset", default=None, help="filter by asset id")
    p.add_argument("--from", dest="time_from", type=float, default=None)
    p.add_argument("--to", dest="time_to", type=float, default=None)
    p.set_defaults(fn=cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
