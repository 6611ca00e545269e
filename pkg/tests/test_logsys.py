import os
import socket
import threading

import pytest

from helpers import concat_bytes, run_to_dir
from polgen.logsys import (ChunkedWriter, LogWriter, SchemaError, StreamServer,
                           chunk_size_from_env, header_line, stream_tap)
from polgen.params import SimParams


def make_row(length):
    # Row of exactly `length` bytes once the newline is appended.
    return "x" * (length - 1)


def chunk_files(out_dir, table):
    return sorted(f for f in os.listdir(out_dir)
                  if f.startswith(table + ".") and f.endswith(".csv"))


def test_rotation_on_data_budget(tmp_path):
    # Three 90-byte rows against a 200-byte budget: two fit, the third
    # starts a new chunk. Headers do not count toward the budget.
    w = ChunkedWriter(str(tmp_path), "checkin", chunk_size=200)
    for _ in range(3):
        w.write_row(make_row(90))
    w.close()
    files = chunk_files(tmp_path, "checkin")
    assert files == ["checkin.00000.csv", "checkin.00001.csv"]
    header = header_line("checkin")
    first = (tmp_path / files[0]).read_text()
    second = (tmp_path / files[1]).read_text()
    assert first == header + make_row(90) + "\n" + make_row(90) + "\n"
    assert second == header + make_row(90) + "\n"


def test_oversized_row_lands_alone(tmp_path):
    w = ChunkedWriter(str(tmp_path), "checkin", chunk_size=100)
    w.write_row(make_row(50))
    w.write_row(make_row(500))
    w.write_row(make_row(50))
    w.close()
    assert len(chunk_files(tmp_path, "checkin")) == 3


def test_no_rows_no_files(tmp_path):
    w = ChunkedWriter(str(tmp_path), "checkin", chunk_size=100)
    w.close()
    lw = LogWriter(str(tmp_path / "lw"))
    lw.close()
    assert chunk_files(tmp_path, "checkin") == []
    assert os.listdir(tmp_path / "lw") == []


def test_unknown_table_rejected(tmp_path):
    with pytest.raises(SchemaError):
        ChunkedWriter(str(tmp_path), "telemetry")
    lw = LogWriter(str(tmp_path))
    with pytest.raises(SchemaError):
        lw.write("telemetry", ("1",))
    lw.close()


def test_field_count_enforced(tmp_path):
    lw = LogWriter(str(tmp_path))
    with pytest.raises(SchemaError):
        lw.write("checkin", ("0", "2024-01-01T00:00:00", "1"))
    lw.close()


def test_chunk_size_env_override(monkeypatch):
    monkeypatch.setenv("POLGEN_CHUNK_BYTES", "4096")
    assert chunk_size_from_env() == 4096
    monkeypatch.delenv("POLGEN_CHUNK_BYTES")
    assert chunk_size_from_env(123) == 123


def test_branch_chunk_naming(tmp_path):
    w = ChunkedWriter(str(tmp_path), "checkin", chunk_size=64,
                      branch="bdeadbeef")
    for _ in range(4):
        w.write_row(make_row(40))
    w.close()
    # 40-byte rows, 64-byte budget: one row per chunk.
    assert chunk_files(tmp_path, "checkin") == [
        f"checkin.bdeadbeef.{i:05d}.csv" for i in range(4)]


def sample_rows():
    return [
        ("checkin", ("0", "2024-01-01T00:00:00", "1", "7", "restaurant")),
        ("social_link", ("5", "2024-01-01T00:05:00", "1", "2", "create")),
        ("checkin", ("9", "2024-01-01T00:09:00", "2", "3", "home")),
    ]


def collect_stream(address, spec):
    conn = socket.create_connection(address, timeout=5)
    conn.sendall(f"SUB {spec}\n".encode())
    reader = conn.makefile("rb")
    reply = reader.readline().decode().strip()
    frames = [ln.decode().rstrip("\n") for ln in reader]
    conn.close()
    return reply, frames


def test_stream_order_and_wildcard(tmp_path):
    server = StreamServer()
    result = {}
    t = threading.Thread(
        target=lambda: result.update(done=collect_stream(server.address, "*")))
    t.start()
    import time
    time.sleep(0.2)  # let the subscriber attach before publishing
    lw = LogWriter(str(tmp_path), server=server)
    for table, fields in sample_rows():
        lw.write(table, fields)
    lw.close()
    t.join(timeout=5)
    server.close()
    reply, frames = result["done"]
    assert reply == "OK 1"
    expected = [f"{table}|{','.join(fields)}"
                for table, fields in sample_rows()]
    assert frames == expected


def test_stream_table_filter(tmp_path):
    server = StreamServer()
    result = {}
    t = threading.Thread(
        target=lambda: result.update(
            done=collect_stream(server.address, "social_link")))
    t.start()
    import time
    time.sleep(0.2)
    lw = LogWriter(str(tmp_path), server=server)
    for table, fields in sample_rows():
        lw.write(table, fields)
    lw.close()
    t.join(timeout=5)
    server.close()
    _, frames = result["done"]
    assert frames == ["social_link|5,2024-01-01T00:05:00,1,2,create"]


def test_bad_handshake_rejected():
    server = StreamServer()
    for greeting in ("HELLO\n", "SUB nonsense_table\n", "SUB a b\n"):
        conn = socket.create_connection(server.address, timeout=5)
        conn.sendall(greeting.encode())
        reply = conn.makefile("rb").readline().decode().strip()
        conn.close()
        assert reply == "ERR bad-handshake"
    server.close()


def test_tap_mirrors_disk_output(small_map, tmp_path):
    server = StreamServer()
    tap_dir = tmp_path / "tap"
    counts = {}
    t = threading.Thread(
        target=lambda: counts.update(
            stream_tap(server.address, "*", str(tap_dir), timeout=30)))
    t.start()
    import time
    time.sleep(0.2)
    p = SimParams(seed=31, num_agents=10, num_days=1)
    out = tmp_path / "disk"
    os.makedirs(out)
    from polgen.engine import run as engine_run
    lw = LogWriter(str(out), server=server)
    summary = engine_run(p, small_map, lw)
    lw.close()
    t.join(timeout=30)
    server.close()
    assert counts == {k: v for k, v in summary.record_counts.items() if v}
    for table, n in counts.items():
        tapped = (tap_dir / f"{table}.csv").read_bytes()
        assert tapped == concat_bytes(out, table)
        assert b"# PARTIAL" not in tapped


def test_tap_partial_trailer_on_disconnect(tmp_path):
    # Hand-rolled publisher that dies mid-stream, leaving a torn frame
    # the way a crashed producer would.
    listener = socket.socket()
    listener.bind(("127.0.0.1", 0))
    listener.listen(1)
    tap_dir = tmp_path / "tap"
    counts = {}
    t = threading.Thread(
        target=lambda: counts.update(
            stream_tap(listener.getsockname(), ["checkin"], str(tap_dir),
                       timeout=30)))
    t.start()
    conn, _ = listener.accept()
    reader = conn.makefile("rb")
    assert reader.readline().strip() == b"SUB checkin"
    conn.sendall(b"OK 1\n")
    conn.sendall(b"checkin|0,2024-01-01T00:00:00,1,7,restaurant\n")
    conn.sendall(b"chec\n")  # truncated frame, then the producer is gone
    conn.close()
    t.join(timeout=30)
    listener.close()
    content = (tap_dir / "checkin.csv").read_text()
    assert content.endswith("# PARTIAL\n")
    assert "0,2024-01-01T00:00:00,1,7,restaurant" in content


class FakeConn:
    def __init__(self):
        self.sent = b""

    def sendall(self, data):
        self.sent += data

    def shutdown(self, how):
        pass

    def close(self):
        pass


def test_lossy_subscriber_counts_drops():
    from polgen.logsys import _Subscriber

    conn = FakeConn()
    sub = _Subscriber(conn, None, lossy=True, capacity=5)
    for i in range(12):
        sub.offer(f"checkin|{i}\n".encode())
    assert sub.dropped == 7
    # Oldest frames survive; pop them to make room for the sentinel.
    kept = [sub.queue.get() for _ in range(5)]
    assert kept == [f"checkin|{i}\n".encode() for i in range(5)]
    sub.queue.put(None)
    sub.drain_loop()
    assert conn.sent.decode().splitlines() == ["STAT dropped=7"]


def test_lossless_subscriber_never_drops():
    from polgen.logsys import _Subscriber

    conn = FakeConn()
    sub = _Subscriber(conn, None, lossy=False, capacity=100)
    for i in range(50):
        sub.offer(f"checkin|{i}\n".encode())
    assert sub.dropped == 0
    sub.queue.put(None)
    sub.drain_loop()
    assert conn.sent.decode().splitlines() == \
        [f"checkin|{i}" for i in range(50)]
