"""Delimited and JSON output with stable schemas and reproducible bytes."""

from __future__ import annotations

import csv
import json
from pathlib import Path

SCHEMA_VERSION = 1


def format_value(value) -> str:
    """Deterministic text for one CSV cell.

    Floats use the shortest round-trip representation so identical numbers
    always produce identical bytes; None becomes the empty cell.
    """
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if type(value) is not float and hasattr(value, "item"):
        # numpy scalars first: np.float64 subclasses float, and its repr
        # would otherwise leak into the file
        return format_value(value.item())
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, schema: str, cfg_hash: str, columns, rows) -> Path:
    """Write rows under a comment line carrying the schema id and config hash.

    The comment line is ``# schema=<id> version=<n> config=<sha256>``; the
    next line is the column header; everything is LF-terminated so the same
    inputs give the same bytes on every platform.
    """
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# schema={schema} version={SCHEMA_VERSION} config={cfg_hash}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def read_csv(path) -> tuple[dict, list[str], list[list[str]]]:
    """Read a file written by :func:`write_csv`; returns (meta, columns, rows)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        first = fh.readline().strip()
        meta = {}
        if first.startswith("#"):
            for part in first[1:].split():
                if "=" in part:
                    key, _, value = part.partition("=")
                    meta[key] = value
        reader = csv.reader(fh)
        columns = next(reader)
        rows = [row for row in reader]
    return meta, columns, rows


def write_json(path, payload: dict) -> Path:
    """Sorted-key JSON with a trailing newline; no timing data belongs here."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def jsonable(value):
    """Recursively convert numpy containers/scalars for JSON emission."""
    if hasattr(value, "item") and not hasattr(value, "__len__"):
        return value.item()
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, dict):
        return {k: jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    return value
