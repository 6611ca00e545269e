import os

import pytest

matplotlib = pytest.importorskip("matplotlib")

import plot_checkins
import plot_ga
import plot_needs
import plot_trips
from common import VizError, load_anomaly_windows, load_csv


@pytest.fixture()
def checkins_csv(tmp_path):
    path = tmp_path / "checkins.csv"
    lines = ["day,venue_kind,count"]
    for day in range(10):
        for kind, base in (("home", 40), ("workplace", 20),
                           ("restaurant", 30), ("recreation", 10)):
            lines.append(f"{day},{kind},{base + day}")
    path.write_text("\n".join(lines) + "\n")
    return str(path)


@pytest.fixture()
def anomalies_csv(tmp_path):
    path = tmp_path / "anomalies.csv"
    path.write_text("start_day,end_day,kind,level\n5,7,work,red\n")
    return str(path)


@pytest.fixture()
def needs_csv(tmp_path):
    path = tmp_path / "needs.csv"
    lines = ["tick,hunger,energy_deficit,social,balance"]
    for i in range(100):
        t = i * 5
        lines.append(f"{t},{(i % 50) / 50:.3f},{(i % 30) / 30:.3f},"
                     f"{(i % 20) / 20:.3f},{100 - i * 0.5:.2f}")
    path.write_text("\n".join(lines) + "\n")
    return str(path)


@pytest.fixture()
def trips_csv(tmp_path):
    path = tmp_path / "trips.csv"
    lines = ["agent_id,start_tick,end_tick,distance_m"]
    for i in range(50):
        lines.append(f"{i % 5},{i * 10},{i * 10 + 8},{50 + i * 13.5:.3f}")
    path.write_text("\n".join(lines) + "\n")
    return str(path)


@pytest.fixture()
def ga_csv(tmp_path):
    path = tmp_path / "ga.csv"
    path.write_text("generation,best_score,pool_size\n"
                    "0,0.41,8\n1,0.55,7\n2,0.55,9\n3,0.62,8\n")
    return str(path)


def test_checkins_renders_with_one_series_per_kind(checkins_csv, tmp_path):
    out = tmp_path / "checkins.png"
    assert plot_checkins.main(["--in", checkins_csv, "--out", str(out),
                               "--title", "check-ins"]) == 0
    assert out.stat().st_size > 0
    rows = load_csv(checkins_csv, ("day", "venue_kind", "count"))
    fig, ax = plot_checkins.build_figure(rows)
    assert len(ax.get_lines()) == 4
    labels = {line.get_label() for line in ax.get_lines()}
    assert labels == {"apartments", "workplaces", "restaurants", "pubs"}


def test_checkins_anomaly_band_extents(checkins_csv, anomalies_csv):
    rows = load_csv(checkins_csv, ("day", "venue_kind", "count"))
    windows = load_anomaly_windows(anomalies_csv)
    fig, ax = plot_checkins.build_figure(rows, windows)
    spans = [p for p in ax.patches if p.get_label().endswith("anomaly")]
    assert len(spans) == 1
    x0, x1 = spans[0].get_x(), spans[0].get_x() + spans[0].get_width()
    # Window days 5..7 inclusive shade [5, 8) on the day axis.
    assert (x0, x1) == (5.0, 8.0)


def test_needs_renders_three_need_series(needs_csv, tmp_path):
    out = tmp_path / "needs.png"
    assert plot_needs.main(["--in", needs_csv, "--out", str(out)]) == 0
    assert out.stat().st_size > 0
    rows = load_csv(needs_csv, ("tick", "hunger", "energy_deficit",
                                "social", "balance"))
    fig, ax = plot_needs.build_figure(rows)
    labels = [line.get_label() for line in ax.get_lines()]
    assert labels == ["hunger", "energy_deficit", "social"]


def test_trips_histogram_renders(trips_csv, tmp_path):
    out = tmp_path / "trips.png"
    assert plot_trips.main(["--in", trips_csv, "--out", str(out),
                            "--bins", "12", "--dpi", "72"]) == 0
    assert out.stat().st_size > 0


def test_ga_curve_renders(ga_csv, tmp_path):
    out = tmp_path / "ga.png"
    assert plot_ga.main(["--in", ga_csv, "--out", str(out)]) == 0
    assert out.stat().st_size > 0
    rows = load_csv(ga_csv, ("generation", "best_score", "pool_size"))
    fig, ax = plot_ga.build_figure(rows)
    line = ax.get_lines()[0]
    assert list(line.get_ydata()) == [0.41, 0.55, 0.55, 0.62]


def test_empty_csv_is_structured_error(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("day,venue_kind,count\n")
    out = tmp_path / "plot.png"
    with pytest.raises(VizError):
        plot_checkins.main(["--in", str(empty), "--out", str(out)])
    assert not out.exists()


def test_missing_column_is_structured_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("day,count\n0,3\n")
    out = tmp_path / "plot.png"
    with pytest.raises(VizError):
        plot_checkins.main(["--in", str(bad), "--out", str(out)])
    assert not out.exists()
