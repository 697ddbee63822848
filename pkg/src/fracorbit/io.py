"""CSV and JSON output with a fixed numeric format."""

from __future__ import annotations

import csv
import json
import os

import numpy as np

FLOAT_FMT = "%.17g"


def _fmt(v):
    if isinstance(v, (str, bytes)):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return FLOAT_FMT % float(v)


def write_csv(path, header, rows):
    """Write rows with 17 significant digits, '.' decimals and LF endings."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_columns(path, columns: dict):
    """Write equally long 1D arrays as named columns."""
    names = list(columns)
    arrays = [np.asarray(columns[k]) for k in names]
    n = len(arrays[0])
    if any(len(a) != n for a in arrays):
        raise ValueError("columns differ in length")
    write_csv(path, names, zip(*arrays))


def read_csv(path):
    """Return ``(header, float array)``; non-numeric cells become NaN."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]

    def num(x):
        try:
            return float(x)
        except ValueError:
            return np.nan

    data = np.array([[num(x) for x in r] for r in body], dtype=float).reshape(len(body), len(header))
    return header, data


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def write_json(path, obj):
    with open(path, "w", newline="\n") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
