"""Tidy aggregate tables for the offline plotting scripts.

Each export kind reads processed logs (or calibration results) and
emits a small CSV the viz scripts consume; no plotting happens here.
"""

from __future__ import annotations

import csv
import json

from .metrics import extract_trips, rows_from_agent_state_csv

TICKS_PER_DAY = 1440

EXPORT_KINDS = ("checkins_per_day_by_venue", "need_traces", "trip_histogram",
                "ga_scores", "anomaly_windows")


class ExportError(Exception):
    pass


def _require_columns(header, needed, path):
    missing = [c for c in needed if c not in header]
    if missing:
        raise ExportError(f"{path}: missing column(s) {', '.join(missing)}")


def export_checkins_per_day_by_venue(checkin_csv, out_path) -> int:
    """Rows (day, venue_kind, count), sorted by day then kind."""
    counts = {}
    with open(checkin_csv, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        _require_columns(reader.fieldnames or [], ("tick", "venue_kind"),
                         checkin_csv)
        for row in reader:
            key = (int(row["tick"]) // TICKS_PER_DAY, row["venue_kind"])
            counts[key] = counts.get(key, 0) + 1
    with open(out_path, "w", encoding="utf-8", newline="\n") as out:
        out.write("day,venue_kind,count\n")
        for (day, kind), n in sorted(counts.items()):
            out.write(f"{day},{kind},{n}\n")
    return len(counts)


def export_need_traces(agent_state_csv, out_path, agent_id) -> int:
    """One agent's need levels and balance over time."""
    rows = 0
    with open(agent_state_csv, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        _require_columns(reader.fieldnames or [],
                         ("tick", "agent_id", "hunger", "energy_deficit",
                          "social", "balance"), agent_state_csv)
        with open(out_path, "w", encoding="utf-8", newline="\n") as out:
            out.write("tick,hunger,energy_deficit,social,balance\n")
            for row in reader:
                if int(row["agent_id"]) != agent_id:
                    continue
                out.write(f"{row['tick']},{row['hunger']},"
                          f"{row['energy_deficit']},{row['social']},"
                          f"{row['balance']}\n")
                rows += 1
    return rows


def export_trip_histogram(agent_state_csv, out_path,
                          stay_radius_m=50.0, stay_min_samples=6) -> int:
    """One row per extracted trip."""
    trips = extract_trips(rows_from_agent_state_csv(agent_state_csv),
                          stay_radius_m, stay_min_samples)
    with open(out_path, "w", encoding="utf-8", newline="\n") as out:
        out.write("agent_id,start_tick,end_tick,distance_m\n")
        for t in trips:
            out.write(f"{t.agent_id},{t.start_tick},{t.end_tick},"
                      f"{t.distance_m:.6f}\n")
    return len(trips)


def export_ga_scores(results_json, out_path) -> int:
    """Per-generation best score from a calibration results file."""
    with open(results_json, "r", encoding="utf-8") as f:
        doc = json.load(f)
    history = doc.get("history")
    if not history:
        raise ExportError(f"{results_json}: no history section")
    with open(out_path, "w", encoding="utf-8", newline="\n") as out:
        out.write("generation,best_score,pool_size\n")
        for h in history:
            out.write(f"{h['generation']},{h['best']!r},{h['pool']}\n")
    return len(history)


def export_anomaly_windows(ground_truth_csv, out_path) -> int:
    """Distinct (start_day, end_day, kind, level) windows for shading."""
    windows = set()
    with open(ground_truth_csv, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        _require_columns(reader.fieldnames or [],
                         ("kind", "level", "start_tick", "end_tick"),
                         ground_truth_csv)
        for row in reader:
            windows.add((int(row["start_tick"]) // TICKS_PER_DAY,
                         (int(row["end_tick"]) - 1) // TICKS_PER_DAY,
                         row["kind"], row["level"]))
    with open(out_path, "w", encoding="utf-8", newline="\n") as out:
        out.write("start_day,end_day,kind,level\n")
        for start_day, end_day, kind, level in sorted(windows):
            out.write(f"{start_day},{end_day},{kind},{level}\n")
    return len(windows)
