"""Reading sample matrices from CSV files (one observation per row)."""
from __future__ import annotations

import csv

import numpy as np

from .errors import ParseError


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_matrix(path):
    """Parse a comma-separated numeric matrix.

    A first line with any non-numeric field is taken as a header. Blank
    lines are skipped. Ragged rows and non-numeric or non-finite entries
    raise :class:`ParseError` with the 1-based line number.
    """
    rows = []
    width = None
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        for fields in reader:
            line = reader.line_num
            if not fields or all(not f.strip() for f in fields):
                continue
            fields = [f.strip() for f in fields]
            if not rows and width is None and not all(_is_number(f) for f in fields):
                width = len(fields)  # header row
                continue
            if width is not None and len(fields) != width:
                raise ParseError(path, line, f"expected {width} fields, found {len(fields)}")
            width = len(fields)
            try:
                vals = [float(f) for f in fields]
            except ValueError:
                bad = next(f for f in fields if not _is_number(f))
                raise ParseError(path, line, f"non-numeric value {bad!r}") from None
            if not all(np.isfinite(vals)):
                raise ParseError(path, line, "non-finite value")
            rows.append(vals)
    if not rows:
        raise ParseError(path, 0, "no data rows")
    return np.array(rows)
