"""CSV and JSON files: trajectories, measurement records, datasets."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .core import STATE_FIELDS
from .records import MEASURED, Record

TRAJECTORY_HEADER = ("t",) + STATE_FIELDS + ("q_x", "q_y", "q_l", "u_x", "u_y", "u_l")
RECORD_HEADER = ("t",) + MEASURED
BREAKAWAY_HEADER = ("x", "y", "axis", "direction", "voltage")
MANIFEST = "manifest.json"
BREAKAWAY_FILE = "breakaway.csv"


class CsvFormatError(ValueError):
    pass


def fmt(v) -> str:
    """Shortest text that parses back to the same double (17 significant digits)."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".17g")


def atomic_write(path, text: str) -> None:
    """Write ``text`` to a sibling temp file, then rename it over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def table_text(header, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_table(path, header, columns) -> None:
    atomic_write(path, table_text(header, columns))


def read_table(path, required=()) -> tuple[list[str], dict]:
    """Numeric CSV with a header row; returns the header and float columns."""
    try:
        with open(path, encoding="utf-8", newline="") as f:
            rows = list(csv.reader(f))
    except (OSError, UnicodeDecodeError) as exc:
        raise CsvFormatError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise CsvFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    missing = [c for c in required if c not in header]
    if missing:
        raise CsvFormatError(f"{path}: missing column(s) {missing}")
    body = [r for r in rows[1:] if r]
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise CsvFormatError(f"{path}: non-numeric value ({exc})") from exc
    if body and data.shape[1] != len(header):
        raise CsvFormatError(f"{path}: ragged rows")
    data = data.reshape(len(body), len(header))
    return header, {h: data[:, i] for i, h in enumerate(header)}


def write_trajectory(path, traj) -> None:
    cols = [traj.t] + [traj.states[:, i] for i in range(len(STATE_FIELDS))]
    cols += [traj.modes[:, i] for i in range(3)] + [traj.inputs[:, i] for i in range(3)]
    write_table(path, TRAJECTORY_HEADER, cols)


def read_trajectory(path) -> dict:
    _, cols = read_table(path, TRAJECTORY_HEADER)
    t = cols["t"]
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise CsvFormatError(f"{path}: time column not strictly increasing")
    for q in ("q_x", "q_y", "q_l"):
        if not np.all(np.isin(cols[q], (1, 2, 3))):
            raise CsvFormatError(f"{path}: mode column {q} outside {{1,2,3}}")
    return cols


def write_record(path, record: Record) -> None:
    write_table(path, RECORD_HEADER, [record.t] + [record[c] for c in MEASURED])


def read_record(path, name=None, meta=None) -> Record:
    _, cols = read_table(path, RECORD_HEADER)
    t = cols.pop("t")
    if t.size < 2 or np.any(np.diff(t) <= 0):
        raise CsvFormatError(f"{path}: need a strictly increasing time column")
    return Record(name or Path(path).stem, t, {c: cols[c] for c in MEASURED}, dict(meta or {}))


def write_json(path, obj) -> None:
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=False) + "\n")


def read_json(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


# --- datasets -----------------------------------------------------------

def write_dataset(directory, records, breakaway_rows=(), extra=None) -> None:
    """Records as CSV files, breakaway samples, and a manifest naming them."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    entries = []
    for r in records:
        fname = f"{r.name}.csv"
        write_record(d / fname, r)
        entries.append({"name": r.name, "file": fname, **r.meta})
    manifest = {"format": 1, "records": entries}
    rows = list(breakaway_rows)
    if rows:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(BREAKAWAY_HEADER)
        for x, y, axis, direction, v in rows:
            w.writerow([fmt(x), fmt(y), axis, int(direction), fmt(v)])
        atomic_write(d / BREAKAWAY_FILE, buf.getvalue())
        manifest["breakaway"] = BREAKAWAY_FILE
    if extra:
        manifest.update(extra)
    write_json(d / MANIFEST, manifest)


def read_breakaway(path) -> list:
    with open(path, encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    if not rows or [h.strip() for h in rows[0]] != list(BREAKAWAY_HEADER):
        raise CsvFormatError(f"{path}: expected header {','.join(BREAKAWAY_HEADER)}")
    out = []
    try:
        for r in rows[1:]:
            if r:
                out.append((float(r[0]), float(r[1]), r[2].strip(), int(r[3]), float(r[4])))
    except (ValueError, IndexError) as exc:
        raise CsvFormatError(f"{path}: bad row ({exc})") from exc
    return out


def read_dataset(directory):
    """Records (with manifest metadata) and breakaway rows of a dataset directory."""
    d = Path(directory)
    manifest = read_json(d / MANIFEST)
    records = []
    for e in manifest.get("records", []):
        meta = {k: v for k, v in e.items() if k not in ("name", "file")}
        records.append(read_record(d / e["file"], e["name"], meta))
    rows = []
    if manifest.get("breakaway"):
        rows = read_breakaway(d / manifest["breakaway"])
    return records, rows, manifest
