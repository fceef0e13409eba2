"""Schema-checked CSV/JSON writers for metric tables."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import jsonschema

_num = {"type": "number", "minimum": 0}
_pct = {"type": "number", "minimum": 0, "maximum": 100}

METRIC_SCHEMA = {
    "type": "object",
    "required": ["rmse", "rel", "d1", "d2", "d3", "n_valid"],
    "properties": {
        "rmse": _num, "rel": _num, "d1": _pct, "d2": _pct, "d3": _pct,
        "n_valid": {"type": "integer", "minimum": 1},
    },
}

ROW_SCHEMA = {
    "type": "object",
    "required": ["label", "rmse", "rel", "d1", "d2", "d3"],
    "properties": {
        "label": {"type": "string", "minLength": 1},
        "rmse": _num, "rel": _num, "d1": _pct, "d2": _pct, "d3": _pct,
        "params": {"type": "integer", "minimum": 0},
        "wall_time": _num,
        "n_valid": {"type": "integer", "minimum": 1},
    },
}


def validate_rows(rows: list[dict]):
    labels = [r["label"] for r in rows]
    if len(set(labels)) != len(labels):
        raise jsonschema.ValidationError(f"duplicate row labels: {labels}")
    for r in rows:
        jsonschema.validate(r, ROW_SCHEMA)
        if not r["d1"] <= r["d2"] <= r["d3"]:
            raise jsonschema.ValidationError(f"delta thresholds not monotone in row {r['label']}")


def write_json(path, obj, schema=None):
    if schema is not None:
        jsonschema.validate(obj, schema)
    Path(path).write_text(json.dumps(obj, indent=2))


def write_table(rows: list[dict], csv_path, txt_path=None, columns=None):
    validate_rows(rows)
    columns = columns or list(rows[0])
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)
    text = format_table(rows, columns)
    if txt_path is not None:
        Path(txt_path).write_text(text + "\n")
    return text


def format_table(rows, columns) -> str:
    def fmt(v):
        if isinstance(v, float):
            return f"{v:.4f}"
        return str(v)

    cells = [[fmt(r.get(c, "")) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(columns)]
    line = " | ".join(c.rjust(w) for c, w in zip(columns, widths))
    sep = "-+-".join("-" * w for w in widths)
    body = [" | ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join([line, sep, *body])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
