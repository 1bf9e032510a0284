"""On-disk artifacts: trajectory CSV, learning curves, parameter files.

Every writer goes through :func:`atomic_write` (temp file in the target
directory, then ``os.replace``).  Floats are written with ``repr`` so files
round-trip exactly and identical runs give identical bytes.
"""
from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

from .simloop import RolloutResult

TRAJECTORY_COLUMNS = ("t", "r", "y", "v", "u_sat", "saturated")


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def _rows_to_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_csv(result: RolloutResult, path) -> Path:
    """Trajectory CSV with columns t, r, y, v, u_sat, saturated (0/1)."""
    rows = [
        (t, repr(float(r)), repr(float(y)), repr(float(v)), repr(float(u)), int(s))
        for t, (r, y, v, u, s) in enumerate(zip(result.r, result.y, result.v, result.u_sat, result.saturated))
    ]
    return atomic_write(path, _rows_to_text(TRAJECTORY_COLUMNS, rows))


def read_csv(path) -> RolloutResult:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TRAJECTORY_COLUMNS:
        raise ValueError(f"{path}: not a trajectory CSV")
    data = np.array([[float(x) for x in row[1:]] for row in rows[1:]]).reshape(-1, 5)
    return RolloutResult(data[:, 0], data[:, 1], data[:, 3], data[:, 2], data[:, 4].astype(bool), None)


def write_learning_curve(costs, path) -> Path:
    rows = [(i, repr(float(c))) for i, c in enumerate(costs)]
    return atomic_write(path, _rows_to_text(("epoch", "mean_train_cost"), rows))


def write_params(params: dict, path, header: str | None = None) -> Path:
    lines = []
    if header:
        lines += [f"# {line}" for line in header.splitlines()]
    lines += [f"{k} = {float(v)!r}" for k, v in params.items()]
    return atomic_write(path, "\n".join(lines) + "\n")


def read_params(path) -> dict[str, float]:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k] = float(v)
    return out
