"""Atomic file output and round-trip CSV formatting."""

from __future__ import annotations

import csv
import io
import os
import tempfile

import numpy as np


def atomic_write_text(path, text: str) -> None:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_value(v) -> str:
    """Shortest round-trip text: ints as ints, floats via repr, strings as is."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    atomic_write_text(path, csv_text(header, rows))


def parse_value(text: str):
    """Inverse of format_value for numeric cells; other text is returned unchanged."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(path) -> tuple[list[str], list[list]]:
    """Header and rows with numeric cells parsed."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path} is empty") from None
        rows = [[parse_value(c) for c in row] for row in reader if row]
    return [h.strip() for h in header], rows


def read_columns(path, names) -> dict:
    """Named columns of a CSV file as lists; raises if a column is missing."""
    header, rows = read_csv(path)
    out = {}
    for name in names:
        if name not in header:
            raise ValueError(f"{path} has no column {name!r} (found {header})")
        j = header.index(name)
        out[name] = [row[j] for row in rows]
    return out
