"""Machine-readable experiment reports (JSON and CSV)."""

from __future__ import annotations

import csv
import io
import json
import math
import os

import numpy as np

from . import __version__

__all__ = ["make_report", "emit_report", "normalize", "render"]

SIG_DIGITS = 9


def normalize(value):
    """Round floats to 9 significant digits and convert numpy values to plain
    Python; non-finite floats become the strings ``"inf"``, ``"-inf"``, ``"nan"``."""
    if isinstance(value, dict):
        return {str(k): normalize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [normalize(v) for v in value]
    if isinstance(value, np.ndarray):
        return [normalize(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return float(f"{v:.{SIG_DIGITS}g}")
    return value


def make_report(kind: str, data: dict, rows=None, *, seed: int, config_hash: str,
                figure: str | None = None) -> dict:
    meta = {"kind": kind, "seed": seed, "config_hash": config_hash, "version": __version__}
    if figure:
        meta["figure"] = figure
    return normalize({"meta": meta, "data": data, "rows": list(rows or [])})


def _csv_text(report: dict, columns=None) -> str:
    rows = report.get("rows", [])
    if columns is None:
        columns = []
        for row in rows:
            for key in row:
                if key not in columns:
                    columns.append(key)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    meta = report.get("meta", {})
    buf.write("# " + " ".join(f"{k}={meta[k]}" for k in meta) + "\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.{SIG_DIGITS}g}"
    if isinstance(v, (list, dict)):
        return json.dumps(v, separators=(",", ":"))
    return v


def render(report: dict, fmt: str, columns=None) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=False) + "\n"
    if fmt == "csv":
        return _csv_text(report, columns)
    raise ValueError(f"unknown report format {fmt!r}")


def emit_report(report: dict, fmt: str, path, columns=None) -> str:
    """Write ``report`` to ``path``; CSV keeps only the per-row table."""
    text = render(report, fmt, columns)
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc
    return text
