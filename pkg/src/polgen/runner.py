"""Orchestrates many independent simulation runs over local CPU workers.

Two modes:
  batch mode  — requests execute in consecutive groups of group_size;
                group k+1 starts only after every run of group k ends.
  line mode   — one FIFO queue drained by `parallel` workers, no
                barriers.

Each run executes in its own worker process (one simulation per
worker); runs share no mutable state, so parallelism cannot perturb
per-run determinism. A failed run is captured in its summary and never
aborts siblings.
"""

from __future__ import annotations

import json
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field

from . import checkpoint as checkpoint_mod
from .anomaly import load_anomaly_specs
from .engine import run as engine_run
from .logsys import LogWriter
from .params import SimParams, params_hash
from .worldmap import load_map


class PlanError(Exception):
    pass


@dataclass
class RunRequest:
    run_id: str
    params: SimParams
    map_path: str
    out_dir: str
    anomaly_path: str = ""
    resume_snapshot: str = ""
    sample_interval: int = 5
    chunk_size: int = None


@dataclass
class RunPlan:
    requests: list
    batch_processing: bool = False
    parallel: int = 1
    group_size: int = 1

    def validate(self):
        errors = []
        if self.parallel < 1:
            errors.append("parallel must be >= 1")
        if self.batch_processing and self.group_size < 1:
            errors.append("group_size must be >= 1 in batch mode")
        ids = [r.run_id for r in self.requests]
        if len(set(ids)) != len(ids):
            errors.append("run_ids must be unique")
        dirs = [os.path.abspath(r.out_dir) for r in self.requests]
        if len(set(dirs)) != len(dirs):
            errors.append("output directories must be disjoint")
        return errors


def execute_request(req: RunRequest) -> dict:
    """Run one simulation; returns a plain-dict summary (picklable)."""
    started = time.time()
    try:
        world_map = load_map(req.map_path)
        os.makedirs(req.out_dir, exist_ok=True)
        specs = load_anomaly_specs(req.anomaly_path) if req.anomaly_path else []
        if req.resume_snapshot:
            world = checkpoint_mod.resume(req.resume_snapshot, world_map,
                                          anomaly_specs=specs or None)
            params = world.params
            writer = LogWriter(req.out_dir, chunk_size=req.chunk_size,
                               branch=world.branch)
            summary = engine_run(params, world_map, writer, world=world)
        else:
            params = req.params
            writer = LogWriter(req.out_dir, chunk_size=req.chunk_size)
            summary = engine_run(params, world_map, writer,
                                 anomaly_specs=specs,
                                 sample_interval=req.sample_interval)
        writer.close()
        result = {
            "run_id": req.run_id,
            "status": "ok",
            "params_hash": format(params_hash(params), "016x"),
            "map_hash": format(world_map.map_hash, "016x"),
            "seed": params.seed,
            "out_dir": os.path.abspath(req.out_dir),
            "init_seconds": summary.init_seconds,
            "sim_seconds": summary.sim_seconds,
            "ticks_executed": summary.ticks_executed,
            "agents_exited": summary.agents_exited,
            "record_counts": summary.record_counts,
            "started": started,
            "finished": time.time(),
            "error": "",
        }
    except Exception as e:  # per-run failure policy: capture, don't abort
        result = {
            "run_id": req.run_id,
            "status": "failed",
            "out_dir": os.path.abspath(req.out_dir),
            "started": started,
            "finished": time.time(),
            "error": f"{type(e).__name__}: {e}",
            "traceback": traceback.format_exc(),
        }
    return result


def execute_plan(plan: RunPlan) -> list:
    """Execute every request; summaries come back in request order."""
    errors = plan.validate()
    if errors:
        raise PlanError("; ".join(errors))
    results = {}
    if not plan.requests:
        return []
    if plan.parallel == 1 and not plan.batch_processing:
        return [execute_request(r) for r in plan.requests]
    with ProcessPoolExecutor(max_workers=plan.parallel) as pool:
        if plan.batch_processing:
            reqs = plan.requests
            for i in range(0, len(reqs), plan.group_size):
                group = reqs[i:i + plan.group_size]
                futures = {pool.submit(execute_request, r): r for r in group}
                for fut in as_completed(futures):  # barrier per group
                    results[futures[fut].run_id] = fut.result()
        else:
            futures = {pool.submit(execute_request, r): r for r in plan.requests}
            for fut in as_completed(futures):
                results[futures[fut].run_id] = fut.result()
    return [results[r.run_id] for r in plan.requests]


def save_plan_results(summaries, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump({"runs": summaries}, f, indent=2)
        f.write("\n")


def load_plan_results(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)["runs"]


def load_plan_file(path, parallel=1, batch=False, group_size=1) -> RunPlan:
    """Plan file: one run per line,

        run <run_id> <params_path> <map_path> <out_dir> [anomaly_path]
    """
    from .params import load_params

    requests = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] != "run" or len(parts) not in (5, 6):
                raise PlanError(f"line {lineno}: malformed plan entry {raw!r}")
            params = load_params(parts[2])
            params.map_path = parts[3]
            requests.append(RunRequest(
                run_id=parts[1], params=params, map_path=parts[3],
                out_dir=parts[4],
                anomaly_path=parts[5] if len(parts) == 6 else ""))
    return RunPlan(requests, batch_processing=batch, parallel=parallel,
                   group_size=group_size)
