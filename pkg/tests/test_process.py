import math
import os

import pytest

from polgen.logsys import header_line
from polgen.process import (ProcessError, concat_chunks, convert_coords,
                            convert_file, invert_coords, merge_runs,
                            select_columns)
from polgen.rng import Rng


def write_chunks(run_dir, table, chunks, branch=""):
    os.makedirs(run_dir, exist_ok=True)
    for i, rows in enumerate(chunks):
        tag = f"{branch}." if branch else ""
        path = os.path.join(run_dir, f"{table}.{tag}{i:05d}.csv")
        with open(path, "w", newline="\n") as f:
            f.write(header_line(table))
            for row in rows:
                f.write(row + "\n")


def checkin_row(tick, agent=1, venue=7, kind="restaurant"):
    return f"{tick},2024-01-01T00:00:00,{agent},{venue},{kind}"


def test_concat_counts_and_single_header(tmp_path):
    run_dir = tmp_path / "run"
    write_chunks(run_dir, "checkin",
                 [[checkin_row(0), checkin_row(1)], [checkin_row(2)],
                  [checkin_row(3)]])
    out = tmp_path / "cat.csv"
    assert concat_chunks(str(run_dir), "checkin", str(out)) == 4
    lines = out.read_text().splitlines()
    assert lines[0] == header_line("checkin").strip()
    assert len(lines) == 5
    assert sum(1 for l in lines if l == lines[0]) == 1


def test_concat_branch_chunks(tmp_path):
    run_dir = tmp_path / "run"
    write_chunks(run_dir, "checkin", [[checkin_row(0)], [checkin_row(1)]],
                 branch="b01234abc")
    out = tmp_path / "cat.csv"
    assert concat_chunks(str(run_dir), "checkin", str(out)) == 2


def test_concat_detects_gap(tmp_path):
    run_dir = tmp_path / "run"
    write_chunks(run_dir, "checkin", [[checkin_row(0)], [checkin_row(1)]])
    os.remove(run_dir / "checkin.00000.csv")
    with pytest.raises(ProcessError) as exc:
        concat_chunks(str(run_dir), "checkin", str(tmp_path / "cat.csv"))
    assert "missing chunk" in str(exc.value)


def test_concat_no_files(tmp_path):
    with pytest.raises(ProcessError):
        concat_chunks(str(tmp_path), "checkin", str(tmp_path / "cat.csv"))


def test_select_columns(tmp_path):
    src = tmp_path / "in.csv"
    src.write_text("a,b,c\n1,2,3\n4,5,6\n")
    out = tmp_path / "out.csv"
    assert select_columns(str(src), ["c", "a"], str(out)) == 2
    assert out.read_text() == "c,a\n3,1\n6,4\n"


def test_select_unknown_column(tmp_path):
    src = tmp_path / "in.csv"
    src.write_text("a,b\n1,2\n")
    with pytest.raises(ProcessError) as exc:
        select_columns(str(src), ["z"], str(tmp_path / "out.csv"))
    assert "z" in str(exc.value)


def test_convert_origin_is_exact():
    lat, lon = convert_coords(0.0, 0.0, 44.97, -93.26)
    assert (lat, lon) == (44.97, -93.26)


def test_convert_one_degree_north():
    lat, lon = convert_coords(0.0, 110540.0, 10.0, 20.0)
    assert lat == pytest.approx(11.0, abs=1e-12)
    assert lon == 20.0


def test_convert_round_trip_accuracy():
    rng = Rng(55)
    for _ in range(500):
        lat0 = rng.uniform(-80, 80)
        lon0 = rng.uniform(-179, 179)
        x = rng.uniform(-50_000, 50_000)
        y = rng.uniform(-50_000, 50_000)
        lat, lon = convert_coords(x, y, lat0, lon0)
        x2, y2 = invert_coords(lat, lon, lat0, lon0)
        lat2, lon2 = convert_coords(x2, y2, lat0, lon0)
        assert abs(lat2 - lat) < 1e-9
        assert abs(lon2 - lon) < 1e-9


def test_convert_rejects_polar_origin():
    with pytest.raises(ProcessError):
        convert_coords(1.0, 1.0, 89.5, 0.0)
    with pytest.raises(ProcessError):
        invert_coords(1.0, 1.0, -90.0, 0.0)


def test_convert_file_appends_columns(tmp_path):
    src = tmp_path / "in.csv"
    src.write_text("tick,x,y\n0,0.0,0.0\n1,111320.0,110540.0\n")
    out = tmp_path / "out.csv"
    assert convert_file(str(src), str(out), lat0=0.0, lon0=0.0) == 2
    lines = out.read_text().splitlines()
    assert lines[0] == "tick,x,y,lat,lon"
    assert lines[1].endswith(",0.00000000,0.00000000")
    assert lines[2].endswith(",1.00000000,1.00000000")


def test_convert_file_missing_column(tmp_path):
    src = tmp_path / "in.csv"
    src.write_text("tick,x\n0,1.0\n")
    with pytest.raises(ProcessError):
        convert_file(str(src), str(tmp_path / "out.csv"), 0.0, 0.0)


def test_merge_prepends_run_id_and_trims(tmp_path):
    write_chunks(tmp_path / "a", "checkin",
                 [[checkin_row(0), checkin_row(10)], [checkin_row(20)]])
    write_chunks(tmp_path / "b", "checkin", [[checkin_row(5), checkin_row(25)]])
    out = tmp_path / "merged.csv"
    n = merge_runs([str(tmp_path / "a"), str(tmp_path / "b")], "checkin",
                   str(out), trim=(5, 25))
    assert n == 3
    lines = out.read_text().splitlines()
    assert lines[0] == "run_id," + header_line("checkin").strip()
    assert [l.split(",")[0] for l in lines[1:]] == ["0", "0", "1"]
    assert [int(l.split(",")[1]) for l in lines[1:]] == [10, 20, 5]


def test_merge_schema_mismatch(tmp_path):
    write_chunks(tmp_path / "a", "checkin", [[checkin_row(0)]])
    os.makedirs(tmp_path / "b")
    with open(tmp_path / "b" / "checkin.00000.csv", "w") as f:
        f.write("tick,other\n0,1\n")
    with pytest.raises(ProcessError) as exc:
        merge_runs([str(tmp_path / "a"), str(tmp_path / "b")], "checkin",
                   str(tmp_path / "m.csv"))
    assert "mismatch" in str(exc.value)


def test_merge_missing_run(tmp_path):
    write_chunks(tmp_path / "a", "checkin", [[checkin_row(0)]])
    with pytest.raises(ProcessError):
        merge_runs([str(tmp_path / "a"), str(tmp_path / "empty")], "checkin",
                   str(tmp_path / "m.csv"))
