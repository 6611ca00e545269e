"""Portable binary snapshots of complete simulation state.

Layout (all little-endian, fixed-width):

    magic "POLCK1\\0\\0" | u32 format_version | u64 tick | u32 num_agents
    u64 params_hash | u64 map_hash | 4 x u64 rng state
    u32 sample_interval | str branch | str params_canonical
    str anomaly_spec_lines | str writer_continuation_json
    agent records | pair counter records
    u64 whole-file digest (blake2b-8 of everything before it)

`str` means u32 byte length + UTF-8 payload. Floats are raw IEEE-754
bits, so snapshots and resumed runs are identical across platforms.
Resume needs only the snapshot plus the map file whose hash it records.
"""

from __future__ import annotations

import io
import json
import os
import struct
from dataclasses import dataclass

from . import anomaly as anomaly_mod
from .anomaly import ActiveAnomaly
from .engine import Agent, SimWorld
from .hashing import digest64
from .params import (DEFAULT_SCHEMA, ParamError, SimParams, canonical_form,
                     params_hash, validate_params)

MAGIC = b"POLCK1\x00\x00"
FORMAT_VERSION = 1
NON_RESUMABLE = ("seed", "num_agents", "map_path")


class CheckpointError(Exception):
    pass


def _w_str(buf, text: str):
    data = text.encode("utf-8")
    buf.write(struct.pack("<I", len(data)))
    buf.write(data)


def _r_str(buf) -> str:
    (n,) = struct.unpack("<I", buf.read(4))
    return buf.read(n).decode("utf-8")


def _write_agent(buf, a: Agent):
    buf.write(struct.pack(
        "<IddIiBiiBddddidIB",
        a.id, a.x, a.y, a.home_id, a.work_id, a.activity, a.target_id,
        a.poi, a.intent, a.hunger, a.energy, a.social, a.balance,
        a.meal_ticks_left, a.sleep_rate, a.exit_low_days,
        1 if a.work_skip_today else 0))
    if a.anomaly is None:
        buf.write(b"\x00")
    else:
        an = a.anomaly
        buf.write(struct.pack("<BIBdQQ", 1, an.spec_idx,
                              anomaly_mod.KINDS.index(an.kind), an.prob,
                              an.onset_tick, an.end_tick))
    friends = sorted(a.friends)
    buf.write(struct.pack("<I", len(friends)))
    for f in friends:
        buf.write(struct.pack("<I", f))
    buf.write(struct.pack("<I", len(a.interests)))
    for p in a.interests:
        buf.write(struct.pack("<I", p))
    buf.write(struct.pack("<B", len(a.last_positions)))
    for x, y in a.last_positions:
        buf.write(struct.pack("<dd", x, y))


def _read_agent(buf) -> Agent:
    (aid, x, y, home, work, activity, target, poi, intent, hunger, energy,
     social, balance, meal, sleep_rate, exit_days, skip) = struct.unpack(
        "<IddIiBiiBddddidIB", buf.read(struct.calcsize("<IddIiBiiBddddidIB")))
    a = Agent(aid)
    a.x, a.y = x, y
    a.home_id, a.work_id = home, work
    a.activity, a.target_id, a.poi, a.intent = activity, target, poi, intent
    a.hunger, a.energy, a.social, a.balance = hunger, energy, social, balance
    a.meal_ticks_left, a.sleep_rate = meal, sleep_rate
    a.exit_low_days, a.work_skip_today = exit_days, bool(skip)
    (has_anom,) = struct.unpack("<B", buf.read(1))
    if has_anom:
        spec_idx, kind_i, prob, onset, end = struct.unpack(
            "<IBdQQ", buf.read(struct.calcsize("<IBdQQ")))
        a.anomaly = ActiveAnomaly(spec_idx, anomaly_mod.KINDS[kind_i], prob,
                                  onset, end)
    (nf,) = struct.unpack("<I", buf.read(4))
    a.friends = {struct.unpack("<I", buf.read(4))[0] for _ in range(nf)}
    (ni,) = struct.unpack("<I", buf.read(4))
    a.interests = [struct.unpack("<I", buf.read(4))[0] for _ in range(ni)]
    (np_,) = struct.unpack("<B", buf.read(1))
    a.last_positions = [struct.unpack("<dd", buf.read(16)) for _ in range(np_)]
    return a


def serialize_world(world: SimWorld) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<IQI", FORMAT_VERSION, world.tick, len(world.agents)))
    buf.write(struct.pack("<QQ", params_hash(world.params, world.schema),
                          world.map.map_hash))
    buf.write(struct.pack("<4Q", *world.rng.getstate()))
    buf.write(struct.pack("<I", world.sample_interval))
    _w_str(buf, world.branch)
    _w_str(buf, canonical_form(world.params, world.schema))
    _w_str(buf, "\n".join(anomaly_mod.format_spec(s) for s in world.anomaly_specs))
    continuation = world.writer.continuation() if world.writer is not None else {}
    _w_str(buf, json.dumps(continuation, sort_keys=True))
    for a in world.agents:
        _write_agent(buf, a)
    pairs = sorted(world.pair_counters.items())
    buf.write(struct.pack("<I", len(pairs)))
    for (ai, bi), n in pairs:
        buf.write(struct.pack("<III", ai, bi, n))
    return buf.getvalue()


def save_checkpoint(world: SimWorld, path) -> None:
    """Atomic snapshot write (temp file + rename). Never call mid-step."""
    if world.mid_step:
        raise CheckpointError("save_checkpoint called mid-step")
    body = serialize_world(world)
    data = body + struct.pack("<Q", digest64(body))
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def _params_from_canonical(text: str, schema=DEFAULT_SCHEMA) -> SimParams:
    fields = dict(line.split("=", 1) for line in text.splitlines() if line)
    values = [float(fields[e.name]) for e in schema.entries]
    return SimParams(values=values, seed=int(fields["seed"]),
                     num_agents=int(fields["num_agents"]),
                     num_days=int(fields["num_days"]),
                     schema_version=int(fields["schema_version"]))


def _read_verified(path) -> io.BytesIO:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < len(MAGIC) + 8 or data[:len(MAGIC)] != MAGIC:
        raise CheckpointError("not a snapshot file (bad magic)")
    body, stored = data[:-8], struct.unpack("<Q", data[-8:])[0]
    if digest64(body) != stored:
        raise CheckpointError("snapshot integrity check failed (corrupted file)")
    return io.BytesIO(body)


@dataclass
class SnapshotSummary:
    format_version: int
    tick: int
    num_agents: int
    params_hash: int
    map_hash: int
    upgrade_needed: bool = False


def inspect(path) -> SnapshotSummary:
    """Header-only summary; does not decode agent payloads."""
    try:
        with open(path, "rb") as f:
            head = f.read(len(MAGIC) + struct.calcsize("<IQIQQ"))
        if len(head) < len(MAGIC) + struct.calcsize("<IQIQQ"):
            raise CheckpointError("truncated snapshot file")
        if head[:len(MAGIC)] != MAGIC:
            raise CheckpointError("not a snapshot file (bad magic)")
        version, tick, num_agents, phash, mhash = struct.unpack(
            "<IQIQQ", head[len(MAGIC):])
    except OSError as e:
        raise CheckpointError(str(e)) from e
    return SnapshotSummary(version, tick, num_agents, phash, mhash,
                           upgrade_needed=version < FORMAT_VERSION)


def resume(path, world_map, overrides=None, schema=DEFAULT_SCHEMA,
           anomaly_specs=None) -> SimWorld:
    """Reconstruct a SimWorld from a snapshot.

    `overrides` maps behavioral parameter names (or num_days) to new
    values; structural parameters (seed, num_agents, map_path) are
    rejected. A non-empty override set stamps a branch id into the
    world so subsequent log files are distinguishable.
    """
    buf = _read_verified(path)
    buf.read(len(MAGIC))
    version, tick, num_agents = struct.unpack("<IQI", buf.read(16))
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"snapshot format v{version} needs upgrade (current v{FORMAT_VERSION})")
    stored_phash, stored_mhash = struct.unpack("<QQ", buf.read(16))
    if world_map.map_hash != stored_mhash:
        raise CheckpointError(
            f"map mismatch: snapshot has {stored_mhash:016x}, "
            f"got {world_map.map_hash:016x}")
    rng_state = struct.unpack("<4Q", buf.read(32))
    (sample_interval,) = struct.unpack("<I", buf.read(4))
    branch = _r_str(buf)
    params = _params_from_canonical(_r_str(buf), schema)
    spec_text = _r_str(buf)
    _r_str(buf)  # writer continuation; informational only
    elapsed_days = tick // 1440

    if overrides:
        for name in overrides:
            if name in NON_RESUMABLE:
                raise CheckpointError(f"parameter {name} is not resumable")
        for name, value in overrides.items():
            if name == "num_days":
                if int(value) < elapsed_days:
                    raise CheckpointError(
                        f"num_days={value} below elapsed {elapsed_days} days")
                params.num_days = int(value)
            else:
                try:
                    params = params.with_value(name, value, schema)
                except KeyError:
                    raise CheckpointError(f"unknown parameter {name}") from None
        errors = validate_params(params, schema)
        if errors:
            raise ParamError(errors)
        tag = json.dumps(sorted(overrides.items()), sort_keys=True).encode()
        branch = f"b{digest64(tag + str(tick).encode()) & 0xFFFFFFFF:08x}"

    world = SimWorld(params, world_map, schema)
    world.tick = tick
    world.rng.setstate(rng_state)
    world.sample_interval = sample_interval
    world.branch = branch
    specs = [anomaly_mod.parse_spec_line(l) for l in spec_text.splitlines() if l]
    if anomaly_specs is not None:
        world.configure_anomalies(anomaly_specs)
    else:
        world.anomaly_specs = specs
    world.agents = [_read_agent(buf) for _ in range(num_agents)]
    (npairs,) = struct.unpack("<I", buf.read(4))
    world.pair_counters = {}
    for _ in range(npairs):
        ai, bi, n = struct.unpack("<III", buf.read(12))
        world.pair_counters[(ai, bi)] = n
    return world
