"""Pooled genetic algorithm for parameter calibration.

Children come from five generation paths: a Producer (range-respecting
random mutation of one parent) and four Mixers that combine parents per
coordinate (max, min, mean, random mix). Every individual is evaluated
by running a full simulation with its parameter vector and scoring the
resulting mobility metrics against a reference set; individuals below
the cull threshold (or with degenerate runs) are removed. The best
individual ever seen is never culled.

The whole GA is deterministic for a fixed (GA seed, config, map,
reference): each evaluation's simulation seed derives from the GA seed,
generation, and child index, and the simulations themselves replay
bit-identically.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field

from .hashing import digest64
from .metrics import (DegenerateRunError, MetricSet, compute_metrics,
                      extract_trips, rows_from_agent_state_csv, similarity)
from .params import (BOOLEAN, DEFAULT_SCHEMA, INTEGER, SimParams,
                     validate_params)
from .process import concat_chunks
from .rng import Rng
from .runner import RunPlan, RunRequest, execute_plan

STRATEGIES = ("producer", "max", "min", "mean", "random_mix")
MUTATION_PROB = 0.25
MUTATION_SIGMA_FRACTION = 0.10

FAILED = float("-inf")


class CalibrationError(Exception):
    pass


@dataclass
class Individual:
    params: SimParams
    score: float = None  # None = unevaluated; -inf = failed
    generation: int = 0
    lineage: str = "seed"


@dataclass
class GaConfig:
    pool_size: int = 16
    layer_size: int = 16
    parent_count: int = 4
    cull_threshold: float = 0.0
    max_generations: int = 20
    patience: int = 5
    top_k: int = 10
    eval_agents: int = 200
    eval_days: int = 7
    parallel: int = 1
    ga_seed: int = 0
    sample_interval: int = 5

    def validate(self):
        errors = []
        if self.layer_size < 2:
            errors.append("layer_size must be >= 2")
        if self.parent_count < 2:
            errors.append("parent_count must be >= 2")
        if self.patience < 1:
            errors.append("patience must be >= 1")
        return errors


def _coerce(value, entry):
    if entry.kind in (INTEGER, BOOLEAN):
        value = float(round(value))
    return min(entry.max, max(entry.min, value))


def seed_pool(config: GaConfig, schema, rng: Rng):
    pool = []
    for _ in range(config.pool_size):
        values = []
        for e in schema.entries:
            if e.kind == BOOLEAN:
                values.append(1.0 if rng.random() < 0.5 else 0.0)
            elif e.kind == INTEGER:
                values.append(float(rng.randint(int(e.min), int(e.max))))
            else:
                values.append(rng.uniform(e.min, e.max))
        pool.append(Individual(SimParams(values=values)))
    return pool


def produce(parent: Individual, schema, rng: Rng) -> Individual:
    """Mutate each coordinate with probability 0.25 by Gaussian noise
    (sigma = 10% of the coordinate's range), clipped back into range."""
    values = []
    for v, e in zip(parent.params.values, schema.entries):
        if rng.random() < MUTATION_PROB:
            v = _coerce(v + rng.gauss(0.0, MUTATION_SIGMA_FRACTION * (e.max - e.min)), e)
        values.append(v)
    child = Individual(SimParams(values=values), lineage="producer")
    return child


def mix(parents, strategy, schema, rng: Rng) -> Individual:
    if strategy not in STRATEGIES[1:]:
        raise CalibrationError(f"unknown mix strategy {strategy!r}")
    values = []
    for i, e in enumerate(schema.entries):
        coords = [p.params.values[i] for p in parents]
        if strategy == "max":
            v = max(coords)
        elif strategy == "min":
            v = min(coords)
        elif strategy == "mean":
            v = sum(coords) / len(coords)
        else:
            v = rng.choice(coords)
        values.append(_coerce(v, e))
    return Individual(SimParams(values=values), lineage=f"mixer({strategy})")


def eval_seed(ga_seed: int, generation: int, child_index: int) -> int:
    return digest64(struct.pack("<QqI", ga_seed & 0xFFFFFFFFFFFFFFFF,
                                generation, child_index))


def _evaluate(individuals, generation, config, ref, map_path, work_dir):
    """Score a batch of individuals via batch-mode simulation runs."""
    requests = []
    for idx, ind in enumerate(individuals):
        p = ind.params.copy()
        p.seed = eval_seed(config.ga_seed, generation, idx)
        p.num_agents = config.eval_agents
        p.num_days = config.eval_days
        ind.params = p
        ind.generation = generation
        out_dir = os.path.join(work_dir, f"g{generation:03d}_c{idx:03d}")
        requests.append(RunRequest(
            run_id=f"g{generation}:{idx}", params=p, map_path=map_path,
            out_dir=out_dir, sample_interval=config.sample_interval))
    plan = RunPlan(requests, batch_processing=True,
                   parallel=config.parallel, group_size=len(requests))
    results = execute_plan(plan)
    for ind, res in zip(individuals, results):
        if res["status"] != "ok":
            ind.score = FAILED
            continue
        try:
            concat = os.path.join(res["out_dir"], "agent_state.concat.csv")
            concat_chunks(res["out_dir"], "agent_state", concat)
            trips = extract_trips(rows_from_agent_state_csv(concat))
            ms = compute_metrics(trips, config.eval_agents, config.eval_days)
            ind.score = similarity(ref, ms)
        except DegenerateRunError:
            ind.score = FAILED
        except Exception as e:
            ind.score = FAILED


def evolve(config: GaConfig, schema, ref: MetricSet, map_path,
           work_dir=None, progress=None, initial=None):
    """Run the GA; returns (top_k individuals, per-generation history).

    `initial` optionally supplies SimParams injected at the head of the
    seeded pool (e.g. warm-starting near a known-good vector).
    """
    errors = config.validate()
    if errors:
        raise CalibrationError("; ".join(errors))
    own_tmp = None
    if work_dir is None:
        own_tmp = tempfile.TemporaryDirectory(prefix="polgen-ga-")
        work_dir = own_tmp.name
    try:
        rng = Rng(config.ga_seed)
        pool = seed_pool(config, schema, rng)
        for i, p in enumerate(initial or []):
            if i < len(pool):
                pool[i] = Individual(p.copy())
        _evaluate(pool, 0, config, ref, map_path, work_dir)
        all_time = list(pool)
        pool = [i for i in pool if i.score >= config.cull_threshold]
        best = max((i.score for i in all_time), default=FAILED)
        if not pool and best == FAILED:
            raise CalibrationError("every seed individual failed evaluation")
        history = [{"generation": 0, "best": best,
                    "pool": len(pool)}]
        stale = 0
        for gen in range(1, config.max_generations + 1):
            ranked = sorted(pool, key=lambda i: i.score, reverse=True)
            parents = ranked[:config.parent_count]
            if len(parents) < 2:
                parents = sorted(all_time, key=lambda i: i.score,
                                 reverse=True)[:config.parent_count]
            children = []
            for ci in range(config.layer_size):
                strategy = STRATEGIES[ci % len(STRATEGIES)]
                if strategy == "producer":
                    child = produce(parents[ci % len(parents)], schema, rng)
                else:
                    child = mix(parents, strategy, schema, rng)
                bad = validate_params(child.params, schema)
                if bad:
                    raise CalibrationError(
                        f"generated invalid child: {'; '.join(bad)}")
                children.append(child)
            _evaluate(children, gen, config, ref, map_path, work_dir)
            if all(c.score == FAILED for c in children):
                raise CalibrationError(
                    f"generation {gen}: every child failed evaluation")
            all_time.extend(children)
            best_ind = max(all_time, key=lambda i: i.score)
            survivors = [i for i in pool + children
                         if i.score >= config.cull_threshold]
            if best_ind not in survivors:  # elitism
                survivors.append(best_ind)
            if not survivors:
                raise CalibrationError(
                    f"generation {gen}: cull threshold removed every individual")
            pool = survivors
            new_best = best_ind.score
            history.append({"generation": gen, "best": new_best,
                            "pool": len(pool)})
            if progress:
                progress(gen, new_best)
            if new_best > best:
                best = new_best
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
        ranked = sorted((i for i in all_time if i.score != FAILED),
                        key=lambda i: i.score, reverse=True)
        return ranked[:config.top_k], history
    finally:
        if own_tmp is not None:
            own_tmp.cleanup()


def save_results(top, history, path, schema=DEFAULT_SCHEMA) -> None:
    doc = {
        "schema": schema.names(),
        "history": history,
        "top": [
            {
                "rank": rank,
                "score": ind.score,
                "generation": ind.generation,
                "lineage": ind.lineage,
                "seed": ind.params.seed,
                "values": dict(zip(schema.names(), ind.params.values)),
            }
            for rank, ind in enumerate(top, start=1)
        ],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")
