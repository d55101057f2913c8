"""CSV and JSON writers with stable, byte-reproducible formatting."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from nvccdd.errors import InvalidParameterError

SCHEMA_VERSION = 1
TRACE_COLUMNS = ("t_s", "signal_plus", "signal_minus", "differential")


def _num(v) -> str:
    # repr of a Python float is the shortest exact round-trip form
    return repr(float(v))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if hasattr(obj, "value") and not isinstance(obj, (int, float, str, bool)):
        return obj.value
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def write_table(path, header, columns) -> Path:
    cols = [np.asarray(c).reshape(-1) for c in columns]
    if len({c.size for c in cols}) > 1:
        raise InvalidParameterError("table columns must have equal length")
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([_num(v) for v in row])
    return path


def read_table(path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidParameterError(f"{path}: empty CSV")
    header, body = rows[0], rows[1:]
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(-1, len(header))
    except ValueError as exc:
        raise InvalidParameterError(f"{path}: {exc}") from None
    return {name: data[:, i] for i, name in enumerate(header)}


def sidecar(metadata: dict, **extra) -> dict:
    return {"schema_version": SCHEMA_VERSION, **metadata, **extra}


def write_trace(path, trace, **extra) -> tuple[Path, Path]:
    """Trace CSV plus ``<name>.json`` metadata sidecar."""
    path = Path(path)
    write_table(path, TRACE_COLUMNS, (trace.times, trace.signal_plus, trace.signal_minus,
                                      trace.differential))
    meta = write_json(path.with_suffix(".json"), sidecar(trace.metadata, **extra))
    return path, meta


def read_trace(path):
    from nvccdd.protocols import TimeTrace

    cols = read_table(path)
    missing = [c for c in TRACE_COLUMNS if c not in cols]
    if missing:
        raise InvalidParameterError(f"{path}: missing columns {missing}")
    return TimeTrace(cols["t_s"], cols["signal_plus"], cols["signal_minus"], cols["differential"])


def write_fit_report(path, result, **extra) -> Path:
    return write_json(path, {"schema_version": SCHEMA_VERSION, **result.as_dict(), **extra})
