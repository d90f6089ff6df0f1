"""Deterministic JSON/CSV output and the run manifest embedded in every file."""
from __future__ import annotations

import csv
import io
import json
from datetime import datetime, timezone
from pathlib import Path

from . import __version__


def manifest(command: str, config: dict, seed: int | None = None) -> dict:
    """Run record; re-running with the same fields reproduces the outputs."""
    return {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def dumps(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: Path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload), encoding="utf-8")
    return path


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read {path}: {exc}") from None


def comment_block(fields: dict) -> str:
    """``# key=<json>`` lines for embedding metadata in text and CSV outputs."""
    return "".join(f"# {key}={json.dumps(fields[key], sort_keys=True)}\n" for key in sorted(fields))


def csv_text(header, rows, comment: dict | None = None) -> str:
    """CSV with an optional leading ``# key=value`` comment block."""
    buf = io.StringIO()
    if comment:
        buf.write(comment_block(comment))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def strip_timestamps(obj):
    """Copy of a loaded JSON document without ``timestamp`` fields."""
    if isinstance(obj, dict):
        return {k: strip_timestamps(v) for k, v in obj.items() if k != "timestamp"}
    if isinstance(obj, list):
        return [strip_timestamps(v) for v in obj]
    return obj
