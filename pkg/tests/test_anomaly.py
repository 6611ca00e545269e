import csv
import io
import math

import pytest

from helpers import concat_bytes, run_to_dir
from polgen.anomaly import (AnomalyError, AnomalySpec, format_spec,
                            load_anomaly_specs, parse_spec_line)
from polgen.engine import TICKS_PER_DAY
from polgen.params import SimParams


def read_table(out_dir, table):
    data = concat_bytes(out_dir, table)
    if not data:
        return []
    return list(csv.DictReader(io.StringIO(data.decode())))


def test_parse_round_trip_all_assignments():
    lines = [
        "anomaly hunger red random 0.25 1 3",
        "anomaly social orange infectious 2 0.35 0 5",
        "anomaly work yellow location 17 2 2",
        "anomaly work red global 1,3 0 4",
    ]
    for line in lines:
        spec = parse_spec_line(line)
        assert parse_spec_line(format_spec(spec)) == spec


def test_level_probabilities():
    assert parse_spec_line("anomaly hunger red random 0.1 0 0").prob == 1.0
    assert parse_spec_line("anomaly hunger orange random 0.1 0 0").prob == 0.5
    assert parse_spec_line("anomaly hunger yellow random 0.1 0 0").prob == 0.2


@pytest.mark.parametrize("line", [
    "hunger red random 0.25 1 3",          # missing leading keyword
    "anomaly hunger red random 1 3",        # missing argument
    "anomaly hunger red random 1.5 1 3",    # fraction out of range
    "anomaly hunger red random 0.2 3 1",    # start after end
    "anomaly fear red random 0.2 1 3",      # unknown kind
    "anomaly hunger pink random 0.2 1 3",   # unknown level
    "anomaly hunger red teleport 0.2 1 3",  # unknown assignment
    "anomaly work red global 5 0 4",        # listed day outside window
    "anomaly work red infectious 0 0.5 0 4",  # zero initial carriers
])
def test_parse_rejects_malformed(line):
    with pytest.raises(AnomalyError):
        parse_spec_line(line)


def test_load_specs_file(tmp_path):
    path = tmp_path / "a.spec"
    path.write_text("# scenario\nanomaly hunger red random 0.5 0 1\n\n"
                    "anomaly work yellow global 1 0 1\n")
    specs = load_anomaly_specs(path)
    assert len(specs) == 2
    assert specs[0].kind == "hunger"
    assert specs[1].days == (1,)


def test_horizon_validation():
    spec = parse_spec_line("anomaly hunger red random 0.5 0 9")
    assert spec.validate(num_days=5)
    assert not spec.validate(num_days=10)


def test_global_red_work_eliminates_workplace_checkins(small_map, tmp_path):
    p = SimParams(seed=21, num_agents=20, num_days=2)
    spec = parse_spec_line("anomaly work red global 1 1 1")
    run_to_dir(p, small_map, tmp_path / "r", anomaly_specs=[spec])
    day1 = range(TICKS_PER_DAY, 2 * TICKS_PER_DAY)
    work_day0 = work_day1 = 0
    for row in read_table(tmp_path / "r", "checkin"):
        if row["venue_kind"] == "workplace":
            if int(row["tick"]) in day1:
                work_day1 += 1
            else:
                work_day0 += 1
    assert work_day0 > 0
    assert work_day1 == 0
    labels = read_table(tmp_path / "r", "ground_truth")
    assert len(labels) == 20
    for row in labels:
        assert row["kind"] == "work" and row["level"] == "red"
        assert int(row["start_tick"]) == TICKS_PER_DAY
        assert int(row["end_tick"]) == 2 * TICKS_PER_DAY


def test_random_fraction_zero_flags_nobody(small_map, tmp_path):
    p = SimParams(seed=22, num_agents=20, num_days=1)
    spec = parse_spec_line("anomaly hunger red random 0.0 0 0")
    run_to_dir(p, small_map, tmp_path / "r", anomaly_specs=[spec])
    assert read_table(tmp_path / "r", "ground_truth") == []


def test_random_fraction_one_flags_everyone(small_map, tmp_path):
    p = SimParams(seed=23, num_agents=20, num_days=1)
    spec = parse_spec_line("anomaly hunger red random 1.0 0 0")
    run_to_dir(p, small_map, tmp_path / "r", anomaly_specs=[spec])
    labels = read_table(tmp_path / "r", "ground_truth")
    assert sorted(int(r["agent_id"]) for r in labels) == list(range(20))


def test_infectious_spreads_to_all_when_colocated(minimal_map, tmp_path):
    # One home poi, so every agent shares a site overnight: certain
    # transmission must reach the whole population.
    p = SimParams(seed=24, num_agents=20, num_days=2)
    spec = parse_spec_line("anomaly social red infectious 1 1.0 0 1")
    run_to_dir(p, minimal_map, tmp_path / "r", anomaly_specs=[spec])
    labels = read_table(tmp_path / "r", "ground_truth")
    assert sorted(int(r["agent_id"]) for r in labels) == list(range(20))


def binomial_band(n, prob, coverage=0.99):
    tail = (1.0 - coverage) / 2.0
    cdf = 0.0
    lo = hi = None
    for k in range(n + 1):
        cdf += math.comb(n, k) * prob ** k * (1 - prob) ** (n - k)
        if lo is None and cdf > tail:
            lo = k
        if hi is None and cdf >= 1.0 - tail:
            hi = k
    return lo, hi if hi is not None else n


def test_yellow_work_skip_count_in_binomial_band(small_map, tmp_path):
    p = SimParams(seed=25, num_agents=100, num_days=2)
    spec = parse_spec_line("anomaly work yellow global 1 1 1")
    run_to_dir(p, small_map, tmp_path / "r", anomaly_specs=[spec])
    attended = set()
    day1 = range(TICKS_PER_DAY, 2 * TICKS_PER_DAY)
    for row in read_table(tmp_path / "r", "checkin"):
        if row["venue_kind"] == "workplace" and int(row["tick"]) in day1:
            attended.add(int(row["agent_id"]))
    skipped = 100 - len(attended)
    lo, hi = binomial_band(100, 0.2)
    assert lo <= skipped <= hi, (skipped, lo, hi)


def test_hunger_anomaly_increases_meal_frequency(small_map, tmp_path):
    p = SimParams(seed=26, num_agents=30, num_days=1)
    spec = parse_spec_line("anomaly hunger red random 1.0 0 0")
    run_to_dir(p, small_map, tmp_path / "base")
    run_to_dir(p, small_map, tmp_path / "anom", anomaly_specs=[spec])

    def meal_checkins(out_dir):
        return sum(1 for r in read_table(out_dir, "checkin")
                   if r["venue_kind"] == "restaurant")

    assert meal_checkins(tmp_path / "anom") > meal_checkins(tmp_path / "base")


def test_location_trigger_flags_visitors_only(small_map, tmp_path):
    target = small_map.by_kind("workplace")[0]
    p = SimParams(seed=27, num_agents=30, num_days=1)
    spec = parse_spec_line(f"anomaly hunger yellow location {target.id} 0 0")
    run_to_dir(p, small_map, tmp_path / "r", anomaly_specs=[spec])
    flagged = {int(r["agent_id"]) for r in read_table(tmp_path / "r", "ground_truth")}
    visitors = {int(r["agent_id"])
                for r in read_table(tmp_path / "r", "checkin")
                if int(r["venue_id"]) == target.id}
    assert flagged
    assert flagged <= visitors
