"""Deterministic JSON and CSV serialisation of analysis reports.

Floats are written with 17 significant digits, complex numbers as
``[re, im]`` and non-finite values as the strings ``"nan"``, ``"inf"`` and
``"-inf"``.  Keys keep insertion order, so identical inputs give
byte-identical output.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, is_dataclass

import numpy as np

CSV_COLUMNS = ("analysis", "field", "index", "re", "im", "value")


def _float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if x == 0:
        return "-0.0" if math.copysign(1, x) < 0 else "0.0"
    s = format(x, ".17g")
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def normalise(obj):
    """Convert numpy scalars/arrays, tuples and dataclasses to plain data."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return normalise(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): normalise(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return [normalise(v) for v in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [normalise(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return complex(obj)
    return obj


def _emit(obj, out: list, indent: int) -> None:
    pad = "  " * indent
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_float(obj))
    elif isinstance(obj, complex):
        out.append(f"[{_float(obj.real)}, {_float(obj.imag)}]")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = list(obj.items())
        for k, (key, val) in enumerate(items):
            out.append(f"{pad}  {json.dumps(key)}: ")
            _emit(val, out, indent + 1)
            out.append(",\n" if k < len(items) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        if all(isinstance(v, (int, float, complex, str, bool)) or v is None for v in obj):
            parts = []
            for v in obj:
                tmp = []
                _emit(v, tmp, 0)
                parts.append("".join(tmp))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for k, val in enumerate(obj):
            out.append(pad + "  ")
            _emit(val, out, indent + 1)
            out.append(",\n" if k < len(obj) - 1 else "\n")
        out.append(pad + "]")
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def to_json(report) -> str:
    out: list = []
    _emit(normalise(report), out, 0)
    return "".join(out) + "\n"


def _cell(x) -> str:
    if isinstance(x, float):
        return _float(x).strip('"')
    return str(x)


def _rows(analysis: str, path: str, obj, index, rows: list) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _rows(analysis, f"{path}.{k}" if path else k, v, index, rows)
    elif isinstance(obj, list):
        for j, v in enumerate(obj):
            _rows(analysis, path, v, j if index == "" else f"{index}/{j}", rows)
    elif isinstance(obj, complex):
        rows.append((analysis, path, index, _cell(obj.real), _cell(obj.imag), ""))
    elif obj is None:
        rows.append((analysis, path, index, "", "", ""))
    else:
        val = ("true" if obj else "false") if isinstance(obj, bool) else _cell(obj)
        rows.append((analysis, path, index, "", "", val))


def to_csv(report) -> str:
    """Flatten ``results`` and ``checks`` into rows with fixed columns."""
    rep = normalise(report)
    rows: list = []
    analysis = rep.get("command", "")
    _rows(analysis, "results", rep.get("results"), "", rows)
    _rows(analysis, "checks", rep.get("checks"), "", rows)
    _rows(analysis, "errors", rep.get("errors"), "", rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    w.writerows(rows)
    return buf.getvalue()


def table_csv(columns, rows) -> str:
    """Plain CSV table, floats at 17 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(normalise(x)) for x in r])
    return buf.getvalue()
