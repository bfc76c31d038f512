"""Reader for convergence reports.

Reports are delimited text with a fixed header ``case,N,norm,value,rate``.
Lines starting with ``#`` are comments and may appear anywhere.  The rate
column is empty on the coarsest resolution of each series.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import TypedDict

EXPECTED_HEADER = ["case", "N", "norm", "value", "rate"]


class ReportRow(TypedDict):
    """One resolution of one error series."""

    case: str
    N: int
    norm: str
    value: float
    rate: float | None


def _fail(path: Path, lineno: int, message: str) -> ValueError:
    return ValueError(f"{path}: line {lineno}: {message}")


def read_report(path: str | Path) -> list[ReportRow]:
    """Parses a convergence report into typed rows.

    Raises ValueError with the offending line number for any malformed
    content, and for reports that contain no data rows at all.
    """
    path = Path(path)
    rows: list[ReportRow] = []
    header_seen = False
    with open(path, newline="") as handle:
        for lineno, record in enumerate(csv.reader(handle), start=1):
            if not record or record[0].lstrip().startswith("#"):
                continue
            record = [cell.strip() for cell in record]
            if not header_seen:
                if record != EXPECTED_HEADER:
                    raise _fail(
                        path, lineno,
                        f"expected header {','.join(EXPECTED_HEADER)}, "
                        f"got {','.join(record)}")
                header_seen = True
                continue
            if len(record) != len(EXPECTED_HEADER):
                raise _fail(
                    path, lineno,
                    f"expected {len(EXPECTED_HEADER)} fields, got {len(record)}")
            case, n_text, norm, value_text, rate_text = record
            try:
                n = int(n_text)
            except ValueError:
                raise _fail(path, lineno, f"N is not an integer: {n_text!r}") from None
            try:
                value = float(value_text)
            except ValueError:
                raise _fail(
                    path, lineno, f"value is not a number: {value_text!r}") from None
            if rate_text:
                try:
                    rate: float | None = float(rate_text)
                except ValueError:
                    raise _fail(
                        path, lineno, f"rate is not a number: {rate_text!r}") from None
            else:
                rate = None
            rows.append(ReportRow(case=case, N=n, norm=norm, value=value, rate=rate))
    if not header_seen:
        raise ValueError(f"{path}: no header line found")
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows
