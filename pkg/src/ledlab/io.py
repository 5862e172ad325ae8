"""Report and data-file output: atomic writes, stable JSON, CSV tables, Matrix Market."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np
import scipy.io

from .errors import ConfigError


def atomic_write(path, data):
    """Write ``data`` (str or bytes) to ``path`` through a temp file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def jsonable(obj):
    """Plain JSON types; non-finite floats become ``None``, complex numbers ``[re, im]``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [jsonable(obj.real), jsonable(obj.imag)]
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    return str(obj)


def dumps(obj):
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def write_json(path, obj):
    atomic_write(path, dumps(obj))


def csv_text(rows):
    rows = [jsonable(r) for r in rows]
    if not rows:
        return ""
    header = list(rows[0])
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in header})
    return buf.getvalue()


def write_csv(path, rows):
    atomic_write(path, csv_text(rows))


def table_name(command, table):
    return f"{command}_{table}.csv"


# ---------------------------------------------------------------------------
# Matrix Market problem directories

def _write_mtx(path, A):
    buf = io.BytesIO()
    scipy.io.mmwrite(buf, np.asarray(A), precision=17)
    atomic_write(path, buf.getvalue())


def _read_mtx(path):
    try:
        A = scipy.io.mmread(str(path))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}", "perron.problem") from None
    return np.asarray(A.toarray() if hasattr(A, "toarray") else A, dtype=complex)


def write_problem(directory, g_steps, f_steps, q_minus, q_plus):
    """Store a dichotomy problem as ``g_0000.mtx ... f_0000.mtx ... q_minus.mtx q_plus.mtx``."""
    d = Path(directory)
    for n, (g, f) in enumerate(zip(g_steps, f_steps)):
        _write_mtx(d / f"g_{n:04d}.mtx", g)
        _write_mtx(d / f"f_{n:04d}.mtx", f)
    _write_mtx(d / "q_minus.mtx", q_minus)
    _write_mtx(d / "q_plus.mtx", q_plus)


def read_problem(directory):
    """Inverse of :func:`write_problem`; returns ``(g_steps, f_steps, q_minus, q_plus)``."""
    d = Path(directory)
    g = sorted(d.glob("g_*.mtx"))
    f = sorted(d.glob("f_*.mtx"))
    if not g or len(g) != len(f):
        raise ConfigError(f"{d} needs matching g_NNNN.mtx and f_NNNN.mtx files", "perron.problem")
    for name in ("q_minus.mtx", "q_plus.mtx"):
        if not (d / name).is_file():
            raise ConfigError(f"{d} is missing {name}", "perron.problem")
    return ([_read_mtx(p) for p in g], [_read_mtx(p) for p in f],
            _read_mtx(d / "q_minus.mtx"), _read_mtx(d / "q_plus.mtx"))


def write_matrix(path, A):
    _write_mtx(path, A)
