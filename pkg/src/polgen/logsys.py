"""Log tables, chunked rotating writers, and the live streaming server.

Four CSV tables are emitted by the engine: agent_state, checkin,
social_link, and ground_truth. Rows are written to size-rotated chunk
files `<table>.<index:05d>.csv`, each chunk carrying its own header. A
row is never split across chunks.

The streaming server is strictly read-only with respect to the
simulation: it observes the exact byte rows the writers produce and
pushes them to subscribers over a newline-delimited wire protocol:

    client -> `SUB <table|*>[,<table>...]`
    server -> `OK 1`
    server -> `<table>|<csv-row>` per record, in emission order
    server -> `STAT dropped=<n>` at disconnect (lossy mode only)

Lossless mode applies backpressure to the writer; lossy mode drops at a
bounded per-subscriber queue and reports the drop count.
"""

from __future__ import annotations

import os
import queue
import socket
import socketserver
import threading

DEFAULT_CHUNK_BYTES = 536_870_912  # 512 MB
PROTOCOL_VERSION = 1

SCHEMAS = {
    "agent_state": ("tick", "timestamp", "agent_id", "x", "y", "activity",
                    "hunger", "energy_deficit", "social", "balance"),
    "checkin": ("tick", "timestamp", "agent_id", "venue_id", "venue_kind"),
    "social_link": ("tick", "timestamp", "agent_a", "agent_b", "event"),
    "ground_truth": ("tick", "timestamp", "agent_id", "kind", "level",
                     "start_tick", "end_tick"),
}

TABLES = tuple(SCHEMAS)


class LogError(Exception):
    pass


class SchemaError(LogError):
    pass


def chunk_size_from_env(default: int = DEFAULT_CHUNK_BYTES) -> int:
    return int(os.environ.get("POLGEN_CHUNK_BYTES", default))


def header_line(table: str) -> str:
    return ",".join(SCHEMAS[table]) + "\n"


class ChunkedWriter:
    """Size-rotated CSV writer for one table.

    Rotation happens when appending the next row would push the chunk's
    data bytes past chunk_size; the per-chunk header is bookkeeping and
    does not count against the budget. An oversized single row still
    lands alone in its own chunk. Files are created lazily so an empty
    table leaves no files behind.
    """

    def __init__(self, out_dir, table, chunk_size=None, branch=""):
        if table not in SCHEMAS:
            raise SchemaError(f"unknown table {table!r}")
        self.out_dir = out_dir
        self.table = table
        self.branch = branch
        self.chunk_size = chunk_size if chunk_size is not None else chunk_size_from_env()
        self.chunk_index = 0
        self.bytes_written = 0
        self.rows_written = 0
        self._fh = None
        self._header = header_line(table).encode("utf-8")

    def _chunk_path(self, index: int) -> str:
        if self.branch:
            name = f"{self.table}.{self.branch}.{index:05d}.csv"
        else:
            name = f"{self.table}.{index:05d}.csv"
        return os.path.join(self.out_dir, name)

    def _open_chunk(self):
        self._fh = open(self._chunk_path(self.chunk_index), "wb")
        self._fh.write(self._header)
        self.bytes_written = 0  # data bytes only; header excluded

    def write_row(self, row: str) -> None:
        """Append one already-formatted CSV row (no trailing newline)."""
        data = row.encode("utf-8") + b"\n"
        if self._fh is None:
            self._open_chunk()
        elif self.bytes_written + len(data) > self.chunk_size and self.bytes_written > 0:
            self._rotate()
        self._fh.write(data)
        self.bytes_written += len(data)
        self.rows_written += 1

    def _rotate(self):
        self._fh.close()
        self.chunk_index += 1
        self._open_chunk()

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None


class LogWriter:
    """Owns one ChunkedWriter per table plus optional stream forwarding."""

    def __init__(self, out_dir, chunk_size=None, branch="", server=None):
        os.makedirs(out_dir, exist_ok=True)
        self.out_dir = out_dir
        self.writers = {t: ChunkedWriter(out_dir, t, chunk_size, branch)
                        for t in TABLES}
        self.server = server

    def write(self, table: str, fields) -> None:
        schema = SCHEMAS.get(table)
        if schema is None:
            raise SchemaError(f"unknown table {table!r}")
        if len(fields) != len(schema):
            raise SchemaError(
                f"{table}: got {len(fields)} fields, schema has {len(schema)}")
        row = ",".join(fields)
        self.writers[table].write_row(row)
        if self.server is not None:
            self.server.publish(table, row)

    def record_counts(self):
        return {t: w.rows_written for t, w in self.writers.items()}

    def continuation(self):
        return {t: {"chunk_index": w.chunk_index,
                    "bytes_written": w.bytes_written,
                    "rows_written": w.rows_written}
                for t, w in self.writers.items()}

    def close(self):
        for w in self.writers.values():
            w.close()
        if self.server is not None:
            self.server.end_of_stream()


class _Subscriber:
    def __init__(self, conn, tables, lossy, capacity=10_000):
        self.conn = conn
        self.tables = tables  # None means wildcard
        self.lossy = lossy
        self.queue = queue.Queue(maxsize=capacity)
        self.dropped = 0
        self.dead = False

    def matches(self, table: str) -> bool:
        return self.tables is None or table in self.tables

    def offer(self, frame: bytes) -> None:
        if self.dead:
            return
        if self.lossy:
            try:
                self.queue.put_nowait(frame)
            except queue.Full:
                self.dropped += 1
        else:
            self.queue.put(frame)  # backpressure on the writer

    def drain_loop(self):
        try:
            while True:
                frame = self.queue.get()
                if frame is None:
                    if self.lossy and self.dropped:
                        self.conn.sendall(
                            f"STAT dropped={self.dropped}\n".encode())
                    break
                self.conn.sendall(frame)
        except OSError:
            self.dead = True
        finally:
            try:
                self.conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self.conn.close()


class StreamServer:
    """TCP pub/sub fan-out for log records. Never touches engine state."""

    def __init__(self, address=("127.0.0.1", 0), mode="lossless"):
        if mode not in ("lossless", "lossy"):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self._subs = []
        self._lock = threading.Lock()
        self._threads = []

        server_self = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                line = self.rfile.readline().decode("utf-8", "replace").strip()
                if not line.startswith("SUB ") or len(line.split()) != 2:
                    self.wfile.write(b"ERR bad-handshake\n")
                    return
                spec = line.split()[1]
                if spec == "*":
                    tables = None
                else:
                    tables = set(spec.split(","))
                    bad = tables - set(TABLES)
                    if bad:
                        self.wfile.write(b"ERR bad-handshake\n")
                        return
                self.wfile.write(f"OK {PROTOCOL_VERSION}\n".encode())
                sub = _Subscriber(self.connection, tables,
                                  lossy=(server_self.mode == "lossy"))
                with server_self._lock:
                    server_self._subs.append(sub)
                # Drain on this handler thread; connection stays open
                # until end_of_stream() enqueues the sentinel.
                sub.drain_loop()

        self._tcp = socketserver.ThreadingTCPServer(address, Handler)
        self._tcp.daemon_threads = True
        self.address = self._tcp.server_address
        t = threading.Thread(target=self._tcp.serve_forever, daemon=True)
        t.start()
        self._threads.append(t)

    def publish(self, table: str, row: str) -> None:
        frame = f"{table}|{row}\n".encode("utf-8")
        with self._lock:
            subs = list(self._subs)
        for sub in subs:
            if sub.matches(table):
                sub.offer(frame)

    def end_of_stream(self) -> None:
        with self._lock:
            subs = list(self._subs)
            self._subs = []
        for sub in subs:
            sub.queue.put(None)

    def close(self) -> None:
        self.end_of_stream()
        self._tcp.shutdown()
        self._tcp.server_close()


def stream_tap(address, tables, out_dir, timeout=None) -> dict:
    """Subscribe and mirror received rows into per-table CSV files.

    Output files match the format of concatenated on-disk chunks (one
    header, then rows). A mid-stream disconnect leaves a `# PARTIAL`
    trailer in every open file. Returns per-table row counts.
    """
    spec = "*" if tables == "*" else ",".join(tables)
    conn = socket.create_connection(address, timeout=timeout)
    counts = {}
    files = {}
    partial = False
    try:
        conn.sendall(f"SUB {spec}\n".encode())
        reader = conn.makefile("rb")
        reply = reader.readline().decode().strip()
        if not reply.startswith("OK "):
            raise LogError(f"handshake rejected: {reply!r}")
        os.makedirs(out_dir, exist_ok=True)
        while True:
            line = reader.readline()
            if not line:
                break
            text = line.decode("utf-8")
            if text.startswith("STAT "):
                continue
            table, _, row = text.partition("|")
            if table not in SCHEMAS:
                partial = True
                break
            fh = files.get(table)
            if fh is None:
                fh = open(os.path.join(out_dir, f"{table}.csv"), "w",
                          encoding="utf-8", newline="\n")
                fh.write(header_line(table))
                files[table] = fh
            fh.write(row)
            counts[table] = counts.get(table, 0) + 1
    except OSError:
        partial = True
    finally:
        if partial:
            for fh in files.values():
                fh.write("# PARTIAL\n")
        for fh in files.values():
            fh.close()
        conn.close()
    return counts
