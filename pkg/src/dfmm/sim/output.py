"""Run output: delimiter-separated log files plus a JSON manifest.

Every log file starts with a schema-version comment line and a header
row; rows are comma-separated with floats rendered by repr (shortest
round-trip form), so identical runs produce identical bytes. The
manifest names the config hash, seed, engine version, every file with
its row count, and the wall-clock duration (the one intentionally
non-deterministic field).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict

from ..errors import CorruptManifest, UnknownLogKind

ENGINE_VERSION = "0.1.0"
MANIFEST_NAME = "manifest.json"

SCHEMAS = {
    "trades": (
        "timestep", "pair", "v_in", "v_s", "v_prime_s", "rp_x", "rp_y",
        "fee", "v_out", "t_x_after", "t_y_after",
    ),
    "curves": ("slot_id", "asset", "side", "c2", "c1", "c0", "v_lo", "v_hi"),
    "vaults": (
        "epoch", "asset", "side", "c_before", "premium_flow", "settlement",
        "c_after", "liquidated",
    ),
    "auction": (
        "time", "asset", "side", "regime", "breach_clock", "target",
        "a_before", "a_after", "capped",
    ),
    "treasury": ("time", "kind", "asset", "amount", "tr_after"),
    "metrics": ("timestep", "metric_id", "context", "value"),
    "rewards": ("agent", "asset", "class", "claimable"),
}


def _render(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_hash(cfg) -> str:
    payload = json.dumps(asdict(cfg), sort_keys=True, default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def write_logs(artifacts, outdir) -> dict:
    """Write all log files and the manifest; returns the manifest dict."""
    os.makedirs(outdir, exist_ok=True)
    files = []
    for kind, header in SCHEMAS.items():
        rows = artifacts.logs.get(kind, [])
        name = f"{kind}.csv"
        path = os.path.join(outdir, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# schema=dfmm.{kind}.v1\n")
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_render(v) for v in row) + "\n")
        files.append({"name": name, "rows": len(rows)})
    summary_path = os.path.join(outdir, "summary.json")
    with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(artifacts.summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    files.append({"name": "summary.json", "rows": 1})
    manifest = {
        "schema": "dfmm.manifest.v1",
        "engine_version": ENGINE_VERSION,
        "config_hash": config_hash(artifacts.config),
        "seed": artifacts.config.seed,
        "files": files,
        "duration_seconds": artifacts.summary.get("duration_seconds", 0.0),
    }
    with open(os.path.join(outdir, MANIFEST_NAME), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def read_manifest(outdir) -> dict:
    path = os.path.join(outdir, MANIFEST_NAME)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptManifest(f"{path}: {exc}") from None
    if manifest.get("schema") != "dfmm.manifest.v1":
        raise CorruptManifest(f"{path}: unexpected schema {manifest.get('schema')!r}")
    for entry in manifest.get("files", []):
        fp = os.path.join(outdir, entry["name"])
        if not os.path.exists(fp):
            raise CorruptManifest(f"missing file listed in manifest: {entry['name']}")
    return manifest


def read_log(outdir, kind) -> tuple[tuple, list]:
    """Header and raw string rows of one log kind."""
    if kind not in SCHEMAS:
        raise UnknownLogKind(f"unknown log kind {kind!r}; know {sorted(SCHEMAS)}")
    path = os.path.join(outdir, f"{kind}.csv")
    if not os.path.exists(path):
        raise CorruptManifest(f"log file missing: {path}")
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    header = tuple(lines[1].split(","))
    for line in lines[2:]:
        if line:
            rows.append(tuple(line.split(",")))
    return header, rows
