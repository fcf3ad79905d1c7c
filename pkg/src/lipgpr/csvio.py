"""Minimal CSV emit/read helpers with round-trip stable formatting.

Floats are written with shortest round-trip ``repr``; reading infers int,
float or string per cell, so write -> read -> write reproduces a file
byte-identically.
"""

from __future__ import annotations

from pathlib import Path


def format_cell(v):
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (int,)):
        return str(v)
    if v is None:
        return ""
    return str(v)


def parse_cell(s):
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_cell(v) for v in row) + "\n")
    return path


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(",")
        rows = [[parse_cell(c) for c in line.rstrip("\n").split(",")]
                for line in fh if line.strip() != ""]
    return header, rows


def rows_as_dicts(header, rows):
    return [dict(zip(header, row)) for row in rows]
