"""Trip extraction and the four-metric mobility summary.

A stay point is a maximal sample window whose positions all lie within
`stay_radius_m` of the window's *first* position, lasting at least
`stay_min_ticks` samples. Trips are the segments between consecutive
stay points of one agent; trip distance is the polyline length over the
samples from the last sample of one stay to the first sample of the
next. Leading/trailing movement outside any stay pair is not a trip.

The similarity score against a reference metric set is

    1 - (1/4) * sum_k |k(sim) - k(ref)| / k(ref)

over ADT (mean trip distance), ADA (distance per agent per day),
MXD (max trip distance), and MDD (median trip distance). 1.0 means a
perfect match; the score can go negative and is never clamped.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

DEFAULT_STAY_RADIUS_M = 50.0
DEFAULT_STAY_MIN_SAMPLES = 6

METRIC_NAMES = ("adt", "ada", "mxd", "mdd")


class MetricsError(ValueError):
    pass


class DegenerateRunError(MetricsError):
    """No trips at all; the calibrator scores such runs as failed."""


@dataclass(frozen=True)
class Trip:
    agent_id: int
    start_tick: int
    end_tick: int
    distance_m: float


@dataclass(frozen=True)
class MetricSet:
    adt: float
    ada: float
    mxd: float
    mdd: float

    def as_dict(self):
        return {"adt": self.adt, "ada": self.ada, "mxd": self.mxd, "mdd": self.mdd}


def find_stay_points(points, stay_radius_m, stay_min_samples):
    """Return [(start_idx, end_idx_exclusive)] of maximal stay windows."""
    r2 = stay_radius_m * stay_radius_m
    stays = []
    i = 0
    n = len(points)
    while i < n:
        x0, y0 = points[i][1], points[i][2]
        j = i + 1
        while j < n:
            dx = points[j][1] - x0
            dy = points[j][2] - y0
            if dx * dx + dy * dy > r2:
                break
            j += 1
        if j - i >= stay_min_samples:
            stays.append((i, j))
            i = j
        else:
            i += 1
    return stays


def _polyline(points, a, b):
    dist = 0.0
    for k in range(a, b):
        dx = points[k + 1][1] - points[k][1]
        dy = points[k + 1][2] - points[k][2]
        dist += math.sqrt(dx * dx + dy * dy)
    return dist


def extract_trips(rows, stay_radius_m=DEFAULT_STAY_RADIUS_M,
                  stay_min_ticks=DEFAULT_STAY_MIN_SAMPLES):
    """Segment (agent_id, tick, x, y) rows into trips.

    Rows must be sorted by (agent_id, tick) with a uniform sampling
    interval per agent.
    """
    by_agent = {}
    last_key = None
    for agent_id, tick, x, y in rows:
        key = (agent_id, tick)
        if last_key is not None and key <= last_key:
            raise MetricsError(f"rows not sorted by (agent_id, tick) at {key}")
        last_key = key
        by_agent.setdefault(agent_id, []).append((tick, x, y))

    trips = []
    for agent_id in sorted(by_agent):
        points = by_agent[agent_id]
        if len(points) >= 3:
            intervals = {points[k + 1][0] - points[k][0]
                         for k in range(len(points) - 1)}
            if len(intervals) > 1:
                raise MetricsError(
                    f"agent {agent_id}: mixed sampling intervals {sorted(intervals)}")
        stays = find_stay_points(points, stay_radius_m, stay_min_ticks)
        for (_, e0), (s1, _) in zip(stays, stays[1:]):
            a, b = e0 - 1, s1
            trips.append(Trip(agent_id, points[a][0], points[b][0],
                              _polyline(points, a, b)))
    return trips


def compute_metrics(trips, num_agents: int, num_days: int) -> MetricSet:
    if num_agents < 1 or num_days < 1:
        raise MetricsError("num_agents and num_days must be >= 1")
    if not trips:
        raise DegenerateRunError("no trips extracted")
    distances = sorted(t.distance_m for t in trips)
    total = sum(distances)
    n = len(distances)
    if n % 2:
        median = distances[n // 2]
    else:
        median = (distances[n // 2 - 1] + distances[n // 2]) / 2.0
    return MetricSet(
        adt=total / n,
        ada=total / (num_agents * num_days),
        mxd=distances[-1],
        mdd=median,
    )


def similarity(ref: MetricSet, sim: MetricSet) -> float:
    """Score in (-inf, 1]; exact arithmetic per the four-metric formula."""
    total = 0.0
    for name in METRIC_NAMES:
        r = getattr(ref, name)
        if r <= 0:
            raise MetricsError(f"reference metric {name}={r} must be positive")
        total += abs(getattr(sim, name) - r) / r
    return 1.0 - total / len(METRIC_NAMES)


def load_reference(path) -> MetricSet:
    values = {}
    with open(path, "r", encoding="utf-8") as f:
        for raw in f:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            name, _, val = line.partition(" ")
            values[name.strip()] = float(val)
    missing = set(METRIC_NAMES) - set(values)
    if missing:
        raise MetricsError(f"reference file missing metrics: {sorted(missing)}")
    ms = MetricSet(**{k: values[k] for k in METRIC_NAMES})
    for name in METRIC_NAMES:
        if getattr(ms, name) <= 0:
            raise MetricsError(f"reference metric {name} must be positive")
    return ms


def save_reference(ms: MetricSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for name in METRIC_NAMES:
            f.write(f"{name} {getattr(ms, name)!r}\n")


def rows_from_agent_state_csv(path):
    """Yield (agent_id, tick, x, y) from an agent_state CSV file."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        rows = [(int(r["agent_id"]), int(r["tick"]), float(r["x"]), float(r["y"]))
                for r in reader]
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows
