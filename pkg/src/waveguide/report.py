"""Deterministic artifact writers.

Floats are written with 17 significant digits so they round-trip exactly.
JSON reports carry ``"schema": 1`` and the configuration echo; CSV files
start with a comment line holding the configuration hash.  Nothing
time-dependent is written, so identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
from dataclasses import asdict, is_dataclass

import numpy as np

SCHEMA = 1


def fmt(x) -> str:
    """17 significant digits; nan and infinities spelled out."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def plain(obj):
    """Convert numpy, dataclass and enum values into JSON-ready objects.

    Non-finite floats become None (JSON null)."""
    if isinstance(obj, enum.Enum):
        return obj.value
    if is_dataclass(obj) and not isinstance(obj, type):
        return plain(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


class _Encoder(json.JSONEncoder):
    """Formats floats with 17 significant digits.  The C encoder has no float
    hook, so this routes through the pure-Python one."""

    def iterencode(self, o, _one_shot=False):
        return json.encoder._make_iterencode(
            {}, self.default, json.encoder.encode_basestring, self.indent, fmt,
            self.key_separator, self.item_separator, self.sort_keys, self.skipkeys, _one_shot,
        )(o, 0)


def dumps(obj) -> str:
    return json.dumps(plain(obj), cls=_Encoder, indent=2, sort_keys=True) + "\n"


def envelope(kind: str, payload: dict, config_echo: dict) -> dict:
    return {"schema": SCHEMA, "kind": kind, "config": config_echo, "config_sha256": config_echo["sha256"],
            **payload}


def write_json(path, kind: str, payload: dict, config_echo: dict) -> str:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(envelope(kind, payload, config_echo)))
    return str(path)


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    if v is None:
        return ""
    if isinstance(v, (list, tuple)):
        return " ".join(_cell(x) for x in v)
    return str(v)


def csv_text(rows, columns, config_hash: str) -> str:
    buf = io.StringIO()
    buf.write(f"# config_sha256={config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, rows, columns, config_hash: str) -> str:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(rows, columns, config_hash))
    return str(path)


def read_csv(path) -> list:
    """Rows of a CSV written by :func:`write_csv` as dicts of strings."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def write_series(path, x, y, config_hash: str, header=("x", "y")) -> str:
    """Two-column plot-data file."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# config_sha256={config_hash}\n# {header[0]} {header[1]}\n")
        for a, b in zip(np.asarray(x, dtype=float), np.asarray(y, dtype=float)):
            fh.write(f"{fmt(a)} {fmt(b)}\n")
    return str(path)


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return str(path)
