"""Trajectory and report files.

CSV files start with one ``# meta: {...}`` line carrying the metadata as
JSON, followed by the header and rows. Floats are written with ``repr`` so
a file round-trips to the same doubles and identical runs give identical
bytes. JSON files hold the same content as ``{"metadata", "columns",
"data"}``.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from qdyn import __version__

TRAJECTORY_COLUMNS = ("step", "q1_c", "q1_d", "q2_c", "q2_d", "pi1_c", "pi2_c")
META_PREFIX = "# meta: "


def metadata(command, config, **extra):
    meta = {"artifact": "qdyn", "version": __version__, "command": command, "config": config}
    meta.update(extra)
    return meta


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def trajectory_table(steps, q=None, pi_c=None):
    """Rows in the trajectory schema; missing Q or policy columns are NaN."""
    steps = np.asarray(steps)
    n = steps.shape[0]
    q = np.full((n, 4), np.nan) if q is None else np.asarray(q, dtype=np.float64)
    pi_c = np.full((n, 2), np.nan) if pi_c is None else np.asarray(pi_c, dtype=np.float64)
    if q.shape != (n, 4) or pi_c.shape != (n, 2):
        raise ValueError("trajectory schema needs 4 Q columns and 2 policy columns")
    return [[steps[k], *q[k], *pi_c[k]] for k in range(n)]


def write_csv(path, columns, rows, meta):
    buf = io.StringIO()
    buf.write(META_PREFIX + json.dumps(meta, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def write_table_json(path, columns, rows, meta):
    write_json(path, {"metadata": meta, "columns": list(columns),
                      "data": [[_jsonable(v) for v in row] for row in rows]})


def write_table(path, columns, rows, meta, fmt):
    """Write ``rows`` as ``<path>.csv`` or ``<path>.json``; returns the file path."""
    path = Path(path).with_suffix("." + fmt)
    if fmt == "csv":
        write_csv(path, columns, rows, meta)
    elif fmt == "json":
        write_table_json(path, columns, rows, meta)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def read_table(path):
    """Inverse of :func:`write_table`: ``(metadata, columns, float array)``."""
    path = Path(path)
    if path.suffix == ".json":
        d = json.loads(path.read_text())
        data = np.array([[np.nan if v is None else v for v in row] for row in d["data"]],
                        dtype=np.float64)
        return d["metadata"], d["columns"], data
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith(META_PREFIX):
        raise ValueError(f"{path} has no metadata line")
    meta = json.loads(lines[0][len(META_PREFIX):])
    reader = csv.reader(lines[1:])
    columns = next(reader)
    rows = list(reader)
    numeric = []
    for row in rows:
        try:
            numeric.append([float(v) for v in row])
        except ValueError:
            numeric.append([float(v) if _isfloat(v) else np.nan for v in row])
    return meta, columns, np.array(numeric, dtype=np.float64).reshape(len(rows), len(columns))


def _isfloat(v):
    try:
        float(v)
    except ValueError:
        return False
    return True
