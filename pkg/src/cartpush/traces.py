"""CSV persistence for simulation traces."""

from __future__ import annotations

import csv

import numpy as np

from .errors import InsufficientDataError
from .simulation import TRACE_COLUMNS


class TraceSchemaError(ValueError):
    """A CSV file does not follow the trace schema."""


def _fmt(v):
    return format(float(v), ".17g")


def write_trace(trace, path):
    """Write the fixed-schema columns of ``trace`` to ``path``."""
    cols = [trace.columns[n] for n in TRACE_COLUMNS]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in zip(*cols):
            w.writerow([_fmt(v) for v in row])


def read_trace(path, min_rows=1):
    """Load a trace CSV into a dict of float arrays, validating the schema."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceSchemaError("empty trace file") from None
        if tuple(h.strip() for h in header) != TRACE_COLUMNS:
            missing = [c for c in TRACE_COLUMNS if c not in header]
            raise TraceSchemaError(
                f"header mismatch (missing: {', '.join(missing) or 'none'}; expected {len(TRACE_COLUMNS)} columns)"
            )
        rows = []
        for lineno, row in enumerate(reader, 2):
            if len(row) != len(TRACE_COLUMNS):
                raise TraceSchemaError(f"line {lineno}: expected {len(TRACE_COLUMNS)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise TraceSchemaError(f"line {lineno}: non-numeric field") from None
    if len(rows) < min_rows:
        raise InsufficientDataError(f"trace has {len(rows)} rows, need at least {min_rows}")
    data = np.array(rows, dtype=float).reshape(-1, len(TRACE_COLUMNS))
    if data.shape[0] > 1 and np.any(np.diff(data[:, 0]) <= 0):
        raise TraceSchemaError("time column is not strictly increasing")
    return {name: data[:, i] for i, name in enumerate(TRACE_COLUMNS)}
