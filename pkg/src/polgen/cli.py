"""polgen command suite.

Exit codes: 0 success, 1 usage error, 2 validation error,
3 runtime / I-O error. All errors print machine-parseable
`error: <message>` lines to stderr; no subcommand ever prompts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import calibrate as calibrate_mod
from . import checkpoint as checkpoint_mod
from . import export as export_mod
from . import metrics as metrics_mod
from . import process as process_mod
from . import runner as runner_mod
from .anomaly import AnomalyError, load_anomaly_specs
from .engine import EngineError, run as engine_run
from .logsys import LogError, LogWriter, StreamServer, stream_tap
from .metrics import MetricsError
from .params import (DEFAULT_SCHEMA, ParamError, load_params, params_hash,
                     save_params)
from .process import ProcessError
from .worldmap import MapError, generate_map, load_map, save_map

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

VALIDATION_ERRORS = (ParamError, MapError, AnomalyError, MetricsError,
                     calibrate_mod.CalibrationError, runner_mod.PlanError,
                     checkpoint_mod.CheckpointError)
RUNTIME_ERRORS = (EngineError, LogError, ProcessError, export_mod.ExportError,
                  OSError, json.JSONDecodeError)


class _UsageError(SystemExit):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise _UsageError(EXIT_USAGE)


def _write_manifest(path, manifest):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    os.replace(tmp, path)


def cmd_map_gen(args):
    world = generate_map(
        args.width, args.height,
        {"home": args.homes, "workplace": args.workplaces,
         "restaurant": args.restaurants, "recreation": args.recreation},
        args.seed, args.origin_lat, args.origin_lon)
    save_map(world, args.out)
    print(f"map {args.out} pois={len(world.pois)} hash={world.map_hash:016x}")
    return EXIT_OK


def cmd_run(args):
    params = load_params(args.params)
    world_map = load_map(args.map)
    specs = load_anomaly_specs(args.anomalies) if args.anomalies else []
    server = None
    if args.stream_addr:
        host, _, port = args.stream_addr.partition(":")
        server = StreamServer((host, int(port)), mode=args.stream_mode)
        print(f"streaming on {server.address[0]}:{server.address[1]}")
    os.makedirs(args.out, exist_ok=True)
    writer = LogWriter(args.out, server=server)

    from .engine import SimWorld, TICKS_PER_DAY
    world = SimWorld(params, world_map)
    world.sample_interval = args.sample_interval
    if specs:
        world.configure_anomalies(specs)
    checkpoint_ticks = set()
    if args.checkpoint_at_tick is not None:
        checkpoint_ticks.add(args.checkpoint_at_tick)
    if args.checkpoint_every_days:
        for d in range(args.checkpoint_every_days, params.num_days,
                       args.checkpoint_every_days):
            checkpoint_ticks.add(d * TICKS_PER_DAY)

    end_tick = args.until_tick if args.until_tick is not None \
        else params.num_days * TICKS_PER_DAY
    summary = None
    world.writer = writer
    import time as _time
    t0 = _time.perf_counter()
    while world.tick < end_tick:
        if world.tick in checkpoint_ticks:
            snap = os.path.join(args.out, f"tick{world.tick:08d}.polck")
            checkpoint_mod.save_checkpoint(world, snap)
            print(f"checkpoint {snap}")
        world.step()
    sim_seconds = _time.perf_counter() - t0
    writer.close()
    if server is not None:
        server.close()

    manifest = {
        "run_id": args.run_id,
        "params_path": os.path.abspath(args.params),
        "params_hash": format(params_hash(params), "016x"),
        "map_hash": format(world_map.map_hash, "016x"),
        "seed": params.seed,
        "out_dir": os.path.abspath(args.out),
        "init_seconds": 0.0,
        "sim_seconds": sim_seconds,
        "record_counts": writer.record_counts(),
        "branch": world.branch,
        "status": "ok",
    }
    _write_manifest(os.path.join(args.out, "manifest.json"), manifest)
    print(f"run complete: {world.tick} ticks, "
          f"records={sum(writer.record_counts().values())}")
    return EXIT_OK


def cmd_run_many(args):
    plan = runner_mod.load_plan_file(args.plan, parallel=args.parallel,
                                     batch=args.batch,
                                     group_size=args.group_size)
    summaries = runner_mod.execute_plan(plan)
    runner_mod.save_plan_results(summaries, args.out)
    failed = sum(1 for s in summaries if s["status"] != "ok")
    print(f"{len(summaries)} runs, {failed} failed, manifest at {args.out}")
    return EXIT_OK if failed == 0 else EXIT_RUNTIME


def cmd_calibrate(args):
    ref = metrics_mod.load_reference(args.ref)
    config = calibrate_mod.GaConfig(
        pool_size=args.pool_size, layer_size=args.layer_size,
        parent_count=args.parents, cull_threshold=args.cull,
        max_generations=args.max_gens, patience=args.patience,
        top_k=args.top_k, eval_agents=args.agents, eval_days=args.days,
        parallel=args.parallel, ga_seed=args.ga_seed)
    top, history = calibrate_mod.evolve(
        config, DEFAULT_SCHEMA, ref, args.map,
        progress=lambda g, s: print(f"generation {g}: best={s:.4f}"))
    calibrate_mod.save_results(top, history, args.out)
    print(f"top-1 score {top[0].score:.4f}; results at {args.out}")
    return EXIT_OK


def cmd_metrics(args):
    concat = os.path.join(args.logs, "agent_state.concat.csv")
    process_mod.concat_chunks(args.logs, "agent_state", concat)
    trips = metrics_mod.extract_trips(
        metrics_mod.rows_from_agent_state_csv(concat),
        args.stay_radius, args.stay_min)
    ms = metrics_mod.compute_metrics(trips, args.agents, args.days)
    for name in metrics_mod.METRIC_NAMES:
        print(f"{name} {getattr(ms, name):.6f}")
    if args.ref:
        ref = metrics_mod.load_reference(args.ref)
        print(f"similarity {metrics_mod.similarity(ref, ms):.6f}")
    return EXIT_OK


def cmd_process(args):
    if len(args.inputs) == 1 and not args.trim:
        merged = args.out + ".concat.tmp"
        process_mod.concat_chunks(args.inputs[0], args.table, merged)
    else:
        merged = args.out + ".merge.tmp"
        trim = None
        if args.trim:
            t0, _, t1 = args.trim.partition(":")
            trim = (int(t0), int(t1))
        process_mod.merge_runs(args.inputs, args.table, merged, trim=trim)
    try:
        current = merged
        if args.columns:
            selected = args.out + ".select.tmp"
            process_mod.select_columns(current, args.columns.split(","), selected)
            os.remove(current)
            current = selected
        if args.convert:
            converted = args.out + ".convert.tmp"
            process_mod.convert_file(current, converted,
                                     args.origin_lat, args.origin_lon)
            os.remove(current)
            current = converted
        os.replace(current, args.out)
    finally:
        for suffix in (".concat.tmp", ".merge.tmp", ".select.tmp", ".convert.tmp"):
            leftover = args.out + suffix
            if leftover != args.out and os.path.exists(leftover):
                os.remove(leftover)
    print(f"processed table {args.table} -> {args.out}")
    return EXIT_OK


def cmd_checkpoint(args):
    if args.action != "inspect":
        raise _UsageError(EXIT_USAGE)
    s = checkpoint_mod.inspect(args.snapshot)
    print(f"format_version {s.format_version}")
    print(f"tick {s.tick}")
    print(f"num_agents {s.num_agents}")
    print(f"params_hash {s.params_hash:016x}")
    print(f"map_hash {s.map_hash:016x}")
    if s.upgrade_needed:
        print("note: snapshot uses an older format version; upgrade needed "
              "before resume")
    return EXIT_OK


def cmd_resume(args):
    world_map = load_map(args.map)
    overrides = {}
    for item in args.set or []:
        name, _, value = item.partition("=")
        if not _:
            raise ParamError(f"--set expects name=value, got {item!r}")
        overrides[name.strip()] = float(value)
    specs = load_anomaly_specs(args.anomalies) if args.anomalies else None
    world = checkpoint_mod.resume(args.snapshot, world_map,
                                  overrides=overrides or None,
                                  anomaly_specs=specs)
    os.makedirs(args.out, exist_ok=True)
    writer = LogWriter(args.out, branch=world.branch)
    summary = engine_run(world.params, world_map, writer, world=world)
    writer.close()
    manifest = {
        "run_id": args.run_id,
        "resumed_from": os.path.abspath(args.snapshot),
        "params_hash": format(params_hash(world.params), "016x"),
        "map_hash": format(world_map.map_hash, "016x"),
        "seed": world.params.seed,
        "out_dir": os.path.abspath(args.out),
        "branch": world.branch,
        "overrides": overrides,
        "anomaly_spec_changed": specs is not None,
        "record_counts": writer.record_counts(),
        "status": "ok",
    }
    _write_manifest(os.path.join(args.out, "manifest.json"), manifest)
    print(f"resumed to tick {world.tick}; branch={world.branch or '(none)'}")
    return EXIT_OK


def cmd_stream_tap(args):
    host, _, port = args.addr.partition(":")
    tables = "*" if args.tables == "*" else args.tables.split(",")
    try:
        counts = stream_tap((host, int(port)), tables, args.out)
    except ConnectionRefusedError:
        print(f"error: connection refused to {args.addr}", file=sys.stderr)
        return EXIT_RUNTIME
    for table in sorted(counts):
        print(f"{table} {counts[table]}")
    return EXIT_OK


def cmd_viz_export(args):
    kind = args.kind
    if kind == "checkins_per_day_by_venue":
        n = export_mod.export_checkins_per_day_by_venue(args.input, args.out)
    elif kind == "need_traces":
        if args.agent is None:
            raise _usage("viz-export need_traces requires --agent")
        n = export_mod.export_need_traces(args.input, args.out, args.agent)
    elif kind == "trip_histogram":
        n = export_mod.export_trip_histogram(args.input, args.out)
    elif kind == "ga_scores":
        n = export_mod.export_ga_scores(args.input, args.out)
    elif kind == "anomaly_windows":
        n = export_mod.export_anomaly_windows(args.input, args.out)
    else:
        raise _usage(f"unknown export kind {kind!r}")
    print(f"{kind}: {n} rows -> {args.out}")
    return EXIT_OK


def _usage(message):
    print(f"error: {message}", file=sys.stderr)
    return _UsageError(EXIT_USAGE)


def build_parser():
    parser = _Parser(prog="polgen",
                     description="Deterministic needs-driven mobility data generator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("map-gen", help="generate a synthetic map")
    p.add_argument("--width", type=float, required=True)
    p.add_argument("--height", type=float, required=True)
    p.add_argument("--homes", type=int, required=True)
    p.add_argument("--workplaces", type=int, required=True)
    p.add_argument("--restaurants", type=int, required=True)
    p.add_argument("--recreation", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--origin-lat", type=float, default=44.97)
    p.add_argument("--origin-lon", type=float, default=-93.26)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_map_gen)

    p = sub.add_parser("run", help="run one simulation")
    p.add_argument("--params", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--run-id", default="run0")
    p.add_argument("--anomalies")
    p.add_argument("--sample-interval", type=int, default=5)
    p.add_argument("--until-tick", type=int)
    p.add_argument("--checkpoint-at-tick", type=int)
    p.add_argument("--checkpoint-every-days", type=int)
    p.add_argument("--stream-addr", help="host:port to serve live records on")
    p.add_argument("--stream-mode", choices=("lossless", "lossy"),
                   default="lossless")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("run-many", help="execute a plan of runs")
    p.add_argument("--plan", required=True)
    p.add_argument("--batch", action="store_true")
    p.add_argument("--group-size", type=int, default=1)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run_many)

    p = sub.add_parser("calibrate", help="genetic-algorithm calibration")
    p.add_argument("--ref", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--ga-seed", type=int, required=True)
    p.add_argument("--pool-size", type=int, default=16)
    p.add_argument("--layer-size", type=int, default=16)
    p.add_argument("--parents", type=int, default=4)
    p.add_argument("--cull", type=float, default=0.0)
    p.add_argument("--max-gens", type=int, default=20)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--agents", type=int, default=200)
    p.add_argument("--days", type=int, default=7)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("metrics", help="mobility metrics from logs")
    p.add_argument("--logs", required=True)
    p.add_argument("--agents", type=int, required=True)
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--stay-radius", type=float, default=50.0)
    p.add_argument("--stay-min", type=int, default=6)
    p.add_argument("--ref")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("process", help="concatenate/merge/convert logs")
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--columns")
    p.add_argument("--trim", help="T0:T1 half-open tick range")
    p.add_argument("--convert", action="store_true")
    p.add_argument("--origin-lat", type=float, default=44.97)
    p.add_argument("--origin-lon", type=float, default=-93.26)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("checkpoint", help="snapshot utilities")
    p.add_argument("action", choices=("inspect",))
    p.add_argument("snapshot")
    p.set_defaults(func=cmd_checkpoint)

    p = sub.add_parser("resume", help="resume from a snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--run-id", default="resume0")
    p.add_argument("--set", action="append", metavar="NAME=VALUE")
    p.add_argument("--anomalies")
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("stream-tap", help="subscribe to a live run")
    p.add_argument("--addr", required=True)
    p.add_argument("--tables", default="*")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stream_tap)

    p = sub.add_parser("viz-export", help="aggregate tables for plotting")
    p.add_argument("--kind", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--agent", type=int)
    p.set_defaults(func=cmd_viz_export)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    except VALIDATION_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except RUNTIME_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
