"""Per-venue check-in time series, one line per venue kind, with
optional shaded anomaly windows."""

from __future__ import annotations

import sys

import matplotlib.pyplot as plt

from common import (VENUE_LABELS, add_anomaly_bands, finish, load_anomaly_windows,
                    load_csv, standard_parser)


def build_figure(rows, windows=()):
    by_kind = {}
    for r in rows:
        by_kind.setdefault(r["venue_kind"], []).append(
            (int(r["day"]), int(r["count"])))
    fig, ax = plt.subplots(figsize=(9, 5))
    for kind in sorted(by_kind):
        series = sorted(by_kind[kind])
        ax.plot([d for d, _ in series], [c for _, c in series],
                marker="o", markersize=3, label=VENUE_LABELS.get(kind, kind))
    if windows:
        add_anomaly_bands(ax, windows)
    ax.set_xlabel("day")
    ax.set_ylabel("check-ins per day")
    ax.legend()
    return fig, ax


def main(argv=None) -> int:
    parser = standard_parser("Plot daily check-in counts by venue kind")
    parser.add_argument("--anomalies", help="anomaly-window csv for shading")
    args = parser.parse_args(argv)
    rows = load_csv(args.input, ("day", "venue_kind", "count"))
    windows = load_anomaly_windows(args.anomalies) if args.anomalies else ()
    fig, ax = build_figure(rows, windows)
    finish(fig, ax, args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
