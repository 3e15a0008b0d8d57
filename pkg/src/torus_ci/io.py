"""Field files, JSON reports and CSV tables, all written atomically."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

REPORT_VERSION = 1


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    """Write to a temporary file in the target directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _default(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def write_json(path, obj) -> None:
    atomic_write_text(path, dumps_json(obj))


def csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def write_csv(path, header: list[str], rows: list[list]) -> None:
    atomic_write_text(path, csv_text(header, rows))


def write_field(stem: str | os.PathLike, values: np.ndarray, time_index: int = 0) -> tuple[Path, Path]:
    """Binary little-endian float64, component-outermost, x2 fastest, plus a JSON sidecar."""
    values = np.asarray(values, dtype="<f8")
    n1, n2 = values.shape[-2:]
    comps = int(np.prod(values.shape[:-2], dtype=int)) if values.ndim > 2 else 1
    stem = Path(stem)
    data_path = stem.with_suffix(".bin")
    meta_path = stem.with_suffix(".json")
    atomic_write_bytes(data_path, np.ascontiguousarray(values).tobytes(order="C"))
    meta = {"n1": int(n1), "n2": int(n2), "components": comps, "time_index": int(time_index), "grid": "T2-unit"}
    write_json(meta_path, meta)
    return data_path, meta_path


def read_field(stem: str | os.PathLike) -> tuple[np.ndarray, dict]:
    """Inverse of :func:`write_field`; returns an array of shape (components, n1, n2) and the header."""
    stem = Path(stem)
    meta = json.loads(stem.with_suffix(".json").read_text())
    if meta.get("grid") != "T2-unit":
        raise ValueError("unsupported grid tag")
    raw = np.fromfile(stem.with_suffix(".bin"), dtype="<f8")
    arr = raw.reshape(meta["components"], meta["n1"], meta["n2"])
    return arr, meta
