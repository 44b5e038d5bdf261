"""Pulse, trajectory and verdict files.

JSON files have the layout ``{"meta": {...}, "samples": [[t, x, y, z], ...]}``
with keys in a fixed order and floats written with 17 significant digits, so
the same inputs always give byte-identical output. CSV files carry a single
header row (``t,bx,by,bz`` or ``t,sx,sy,sz``).
"""

import csv
import io
import json
import math

import numpy as np

FORMAT_VERSION = "1"
PULSE_HEADER = ("t", "bx", "by", "bz")
TRAJECTORY_HEADER = ("t", "sx", "sy", "sz")


class SchemaError(ValueError):
    """Raised when a file does not follow the expected layout."""


def _num(x):
    x = float(x)
    return format(x, ".17g") if math.isfinite(x) else "null"


def encode(obj, depth=0):
    """Deterministic JSON text for nested dicts, lists, numbers and strings."""
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        pad = "  " * (depth + 1)
        items = [f"{pad}{json.dumps(str(k))}: {encode(v, depth + 1)}" for k, v in obj.items()]
        if not items:
            return "{}"
        return "{\n" + ",\n".join(items) + "\n" + "  " * depth + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if seq and isinstance(seq[0], (list, tuple, np.ndarray, dict)):
            pad = "  " * (depth + 1)
            return "[\n" + ",\n".join(pad + encode(v, depth + 1) for v in seq) + "\n" + "  " * depth + "]"
        return "[" + ", ".join(encode(v, depth + 1) for v in seq) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def _rows(t, v):
    return np.column_stack([np.asarray(t, dtype=float), np.asarray(v, dtype=float)])


def dumps_json(meta, t, v):
    return encode({"meta": meta, "samples": _rows(t, v)}) + "\n"


def dumps_csv(header, t, v):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in _rows(t, v):
        writer.writerow([_num(x) for x in row])
    return buf.getvalue()


def dumps(fmt, meta, header, t, v):
    if fmt == "json":
        return dumps_json(meta, t, v)
    if fmt == "csv":
        return dumps_csv(header, t, v)
    raise ValueError(f"unknown format {fmt!r}")


def loads(text, header):
    """Parse JSON or CSV sample files.

    Returns
    -------
    meta : dict
        Empty for CSV input.
    t : ndarray, shape (N+1,)
    v : ndarray, shape (N+1, 3)
    """
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from None
        if not isinstance(doc, dict) or set(doc) != {"meta", "samples"}:
            raise SchemaError("top level must hold exactly 'meta' and 'samples'")
        meta, samples = doc["meta"], doc["samples"]
        if not isinstance(meta, dict):
            raise SchemaError("'meta' must be an object")
        for key in ("spec", "version", "seed", "warnings"):
            if key not in meta:
                raise SchemaError(f"'meta' lacks required key {key!r}")
    else:
        reader = csv.reader(io.StringIO(text))
        rows = list(reader)
        if not rows or tuple(c.strip() for c in rows[0]) != header:
            raise SchemaError(f"CSV header must be {','.join(header)}")
        meta, samples = {}, rows[1:]
    try:
        arr = np.array([[float(x) for x in row] for row in samples], dtype=float)
    except (TypeError, ValueError):
        raise SchemaError("samples must be rows of four numbers") from None
    if arr.ndim != 2 or arr.shape[1] != 4 or len(arr) < 3:
        raise SchemaError("samples must be at least three rows of four numbers")
    if not np.all(np.isfinite(arr)):
        raise SchemaError("samples must be finite")
    return meta, arr[:, 0], arr[:, 1:]
