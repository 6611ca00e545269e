"""Post-simulation log processing: chunk concatenation, run merging and
trimming, column selection, and planar-to-geographic conversion.

Everything streams row by row; no table is ever held in memory, since
full runs can reach hundreds of gigabytes.

Coordinate conversion is a local tangent-plane approximation, not a
true map projection:

    lat = lat0 + y / 110540
    lon = lon0 + x / (111320 * cos(lat0))

The constants are meters per degree of latitude and of longitude at the
equator. Self-consistency (forward o inverse ~ identity) is exact to
well under 1e-9 degrees at city scales; fidelity to any official CRS is
not claimed. Converted lat/lon columns are appended, never replacing
the planar x/y.
"""

from __future__ import annotations

import csv
import math
import os
import re

METERS_PER_DEG_LAT = 110540.0
METERS_PER_DEG_LON_EQUATOR = 111320.0


class ProcessError(Exception):
    pass


def _chunk_files(run_dir, table):
    """Chunk paths for a table in index order, validating contiguity."""
    pat = re.compile(rf"^{re.escape(table)}\.(?:b[0-9a-f]{{8}}\.)?(\d{{5}})\.csv$")
    found = {}
    try:
        names = os.listdir(run_dir)
    except OSError as e:
        raise ProcessError(f"cannot read run directory {run_dir}: {e}") from e
    for name in names:
        m = pat.match(name)
        if m:
            found[int(m.group(1))] = os.path.join(run_dir, name)
    if not found:
        return []
    for i in range(max(found) + 1):
        if i not in found:
            raise ProcessError(f"{table}: missing chunk index {i:05d}")
    return [found[i] for i in range(max(found) + 1)]


def concat_chunks(run_dir, table, out_path) -> int:
    """Concatenate chunk files into one CSV with a single header.

    Returns the number of data rows written.
    """
    files = _chunk_files(run_dir, table)
    if not files:
        raise ProcessError(f"no chunk files for table {table!r} in {run_dir}")
    rows = 0
    with open(out_path, "wb") as out:
        for idx, path in enumerate(files):
            with open(path, "rb") as f:
                header = f.readline()
                if idx == 0:
                    out.write(header)
                for line in f:
                    out.write(line)
                    rows += 1
    return rows


def select_columns(in_path, columns, out_path) -> int:
    """Project a CSV onto the named columns, in the requested order."""
    with open(in_path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise ProcessError(f"{in_path}: empty file")
        missing = [c for c in columns if c not in header]
        if missing:
            raise ProcessError(f"unknown column(s): {', '.join(missing)}")
        idxs = [header.index(c) for c in columns]
        rows = 0
        with open(out_path, "w", encoding="utf-8", newline="\n") as out:
            out.write(",".join(columns) + "\n")
            for row in reader:
                out.write(",".join(row[i] for i in idxs) + "\n")
                rows += 1
    return rows


def convert_coords(x: float, y: float, lat0: float, lon0: float):
    """Planar meters -> (lat, lon) degrees via the local tangent plane."""
    if abs(lat0) >= 89.0:
        raise ProcessError(f"origin latitude {lat0} too near a pole")
    lat = lat0 + y / METERS_PER_DEG_LAT
    lon = lon0 + x / (METERS_PER_DEG_LON_EQUATOR * math.cos(math.radians(lat0)))
    return lat, lon


def invert_coords(lat: float, lon: float, lat0: float, lon0: float):
    """Inverse of convert_coords."""
    if abs(lat0) >= 89.0:
        raise ProcessError(f"origin latitude {lat0} too near a pole")
    y = (lat - lat0) * METERS_PER_DEG_LAT
    x = (lon - lon0) * METERS_PER_DEG_LON_EQUATOR * math.cos(math.radians(lat0))
    return x, y


def convert_file(in_path, out_path, lat0, lon0, x_col="x", y_col="y") -> int:
    """Append lat/lon columns (8 decimal places) to a CSV with x/y."""
    with open(in_path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise ProcessError(f"{in_path}: empty file")
        for col in (x_col, y_col):
            if col not in header:
                raise ProcessError(f"unknown column(s): {col}")
        xi, yi = header.index(x_col), header.index(y_col)
        rows = 0
        with open(out_path, "w", encoding="utf-8", newline="\n") as out:
            out.write(",".join(header + ["lat", "lon"]) + "\n")
            for row in reader:
                lat, lon = convert_coords(float(row[xi]), float(row[yi]), lat0, lon0)
                out.write(",".join(row) + f",{lat:.8f},{lon:.8f}\n")
                rows += 1
    return rows


def merge_runs(run_dirs, table, out_path, trim=None) -> int:
    """Merge one table across runs, prepending a run_id column.

    `trim` is an optional (t0, t1) half-open tick range applied before
    the merge. Row order is stable: run order, then emission order.
    """
    rows = 0
    ref_header = None
    with open(out_path, "w", encoding="utf-8", newline="\n") as out:
        for run_id, run_dir in enumerate(run_dirs):
            files = _chunk_files(run_dir, table)
            if not files:
                raise ProcessError(f"no chunk files for {table!r} in {run_dir}")
            for idx, path in enumerate(files):
                with open(path, "r", encoding="utf-8", newline="") as f:
                    header = f.readline().rstrip("\n")
                    if ref_header is None:
                        ref_header = header
                        out.write("run_id," + header + "\n")
                    elif header != ref_header:
                        raise ProcessError(
                            f"schema mismatch in {path}: {header!r} != {ref_header!r}")
                    for line in f:
                        if trim is not None:
                            tick = int(line.split(",", 1)[0])
                            if not (trim[0] <= tick < trim[1]):
                                continue
                        out.write(f"{run_id},{line.rstrip(chr(10))}\n")
                        rows += 1
    return rows
