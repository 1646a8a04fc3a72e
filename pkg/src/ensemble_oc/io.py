"""Deterministic text artifacts: CSV/JSON writers and atomic file output.

Floats are written with ``repr``, the shortest string that round-trips, so
identical runs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile

import numpy as np

from .exceptions import InputError


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def _finite_json(obj):
    """Replace non-finite floats by the strings ``"inf"``, ``"-inf"``, ``"nan"``
    so the output stays strict JSON; ``float()`` reads them back."""
    if isinstance(obj, dict):
        return {k: _finite_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_json(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _finite_json(obj.tolist())
    if isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        return repr(float(obj))
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_finite_json(obj), indent=2, sort_keys=True, default=_default,
                      allow_nan=False) + "\n"


def table_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def trajectory_csv(states) -> str:
    states = np.asarray(states, dtype=float)
    header = ["n"] + [f"x_{j + 1}" for j in range(states.shape[1])]
    return table_csv(header, [[n] + row for n, row in enumerate(states.tolist())])


def control_csv(u) -> str:
    """Rows are steps, columns input coordinates; no header."""
    u = np.asarray(u, dtype=float)
    return "".join(",".join(repr(v) for v in row) + "\n" for row in u.tolist())


def read_control_csv(path, input_dim: int) -> np.ndarray:
    """Read an ``N x m`` numeric CSV; a non-numeric first row is taken as a header."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read control file {path!r}: {exc.strerror}") from None
    data = []
    for lineno, row in enumerate(rows, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            values = [float(c) for c in row]
        except ValueError:
            if lineno == 1 and not data:
                continue
            raise InputError(f"{path}:{lineno}: non-numeric entry in {row!r}") from None
        if len(values) != input_dim:
            raise InputError(f"{path}:{lineno}: expected {input_dim} column(s), got {len(values)}")
        data.append(values)
    if not data:
        raise InputError(f"{path}: no control rows")
    return np.array(data)
