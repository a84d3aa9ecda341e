"""CSV input and key-value fit reports."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .fitting import DataError

__all__ = ["COLUMNS", "format_report", "read_columns", "write_report"]

COLUMNS = {
    "saturation": ("power_mw", "counts_per_s"),
    "spectrum": ("x_ghz", "counts"),
    "g2": ("tau_ns", "coincidences"),
}


def read_columns(path, kind: str) -> np.ndarray:
    """Read a two-column CSV with the header expected for ``kind``.

    Raises
    ------
    DataError
        Empty file, wrong header or a non-numeric cell (with its line number).
    """
    if kind not in COLUMNS:
        raise DataError(f"unknown data kind {kind!r}; expected one of {sorted(COLUMNS)}")
    want = COLUMNS[kind]
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: file is empty")
    header = tuple(c.strip() for c in rows[0])
    if header != want:
        raise DataError(f"{path}:1: expected header {','.join(want)}, got {','.join(header)}")
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise DataError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
        try:
            data.append((float(row[0]), float(row[1])))
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-numeric value in {row!r}") from None
    if not data:
        raise DataError(f"{path}: no data rows")
    return np.array(data)


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.10g}"


def format_report(report: dict) -> str:
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in report.items())


def write_report(path, report: dict) -> Path:
    path = Path(path)
    path.write_text(format_report(report), encoding="utf-8")
    return path
