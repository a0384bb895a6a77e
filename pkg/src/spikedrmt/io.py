"""JSONL records, CSV tables and run manifests.

Floats go through ``json``'s shortest round-trip repr, so records parse back
bit-for-bit.
"""
from __future__ import annotations

import csv
import json
import time
from pathlib import Path

import numpy as np

from . import __version__


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_default, allow_nan=True)


def write_jsonl(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(dumps(row.to_dict() if hasattr(row, "to_dict") else row))
            fh.write("\n")


def read_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n")


def read_spectrum(path) -> np.ndarray:
    """A JSON list, or text/CSV with one value per line (an optional header is skipped)."""
    text = Path(path).read_text().strip()
    if text.startswith("["):
        return np.asarray(json.loads(text), dtype=float)
    vals = []
    for line in text.splitlines():
        cell = line.split(",")[0].strip()
        if not cell:
            continue
        try:
            vals.append(float(cell))
        except ValueError:
            if vals:
                raise
    return np.asarray(vals, dtype=float)


def make_manifest(config_hash: str, master_seed: int, outputs: dict, started: float) -> dict:
    return {
        "config_hash": config_hash,
        "tool_version": __version__,
        "master_seed": master_seed,
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)),
        "finished_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "outputs": outputs,
    }
