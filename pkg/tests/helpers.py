"""Shared run/concat helpers for the test suite."""

import os

from polgen.engine import run as engine_run
from polgen.logsys import LogWriter


def run_to_dir(params, world_map, out_dir, chunk_size=None, anomaly_specs=(),
               sample_interval=5, until_tick=None):
    os.makedirs(out_dir, exist_ok=True)
    writer = LogWriter(str(out_dir), chunk_size=chunk_size)
    summary = engine_run(params, world_map, writer, until_tick=until_tick,
                         anomaly_specs=anomaly_specs,
                         sample_interval=sample_interval)
    writer.close()
    return summary


def concat_bytes(out_dir, table):
    """Concatenated table bytes (single header), empty if no chunks."""
    from polgen.process import ProcessError, concat_chunks

    target = os.path.join(str(out_dir), f"{table}.cat.csv")
    try:
        concat_chunks(str(out_dir), table, target)
    except ProcessError:
        return b""
    with open(target, "rb") as f:
        data = f.read()
    os.remove(target)
    return data
