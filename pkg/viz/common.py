"""Shared loading helpers for the offline plotting scripts.

The scripts consume only the small aggregate CSVs produced by
`polgen viz-export`; they never read raw simulation logs.

Venue naming: the figures label venue kinds with everyday names. The
generator's `home` kind is labeled "apartments" and `recreation` is
labeled "pubs"; restaurants and workplaces keep their names.
"""

from __future__ import annotations

import argparse
import csv

import matplotlib

matplotlib.use("Agg")

VENUE_LABELS = {
    "home": "apartments",
    "workplace": "workplaces",
    "restaurant": "restaurants",
    "recreation": "pubs",
}


class VizError(Exception):
    pass


def load_csv(path, required_columns):
    """Rows as dicts; structured errors for schema mismatch or no data."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f)
            header = reader.fieldnames
            if header is None:
                raise VizError(f"{path}: empty file")
            missing = [c for c in required_columns if c not in header]
            if missing:
                raise VizError(
                    f"{path}: missing column(s) {', '.join(missing)}")
            rows = list(reader)
    except OSError as e:
        raise VizError(f"{path}: {e}") from e
    if not rows:
        raise VizError(f"{path}: no data rows")
    return rows


def load_anomaly_windows(path):
    """[(start_day, end_day, kind, level)] from an anomaly-window export."""
    rows = load_csv(path, ("start_day", "end_day", "kind", "level"))
    return [(int(r["start_day"]), int(r["end_day"]), r["kind"], r["level"])
            for r in rows]


def add_anomaly_bands(ax, windows):
    """Shade each anomaly window; a window covering day d spans [d, d+1)."""
    for start_day, end_day, kind, level in windows:
        ax.axvspan(start_day, end_day + 1, alpha=0.15, color="red",
                   label=f"{kind}/{level} anomaly")


def standard_parser(description):
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument("--in", dest="input", required=True,
                        help="viz-export csv to plot")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--dpi", type=int, default=120)
    parser.add_argument("--title", default="")
    return parser


def finish(fig, ax, args):
    if args.title:
        ax.set_title(args.title)
    fig.tight_layout()
    fig.savefig(args.out, dpi=args.dpi)
