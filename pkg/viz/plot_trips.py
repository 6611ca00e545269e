"""Trip-distance histogram from a trip export."""

from __future__ import annotations

import sys

import matplotlib.pyplot as plt

from common import finish, load_csv, standard_parser


def build_figure(rows, bins=30):
    distances = [float(r["distance_m"]) for r in rows]
    fig, ax = plt.subplots(figsize=(8, 5))
    ax.hist(distances, bins=bins, edgecolor="black")
    ax.set_xlabel("trip distance (m)")
    ax.set_ylabel("trips")
    return fig, ax


def main(argv=None) -> int:
    parser = standard_parser("Plot the trip-distance histogram")
    parser.add_argument("--bins", type=int, default=30)
    args = parser.parse_args(argv)
    rows = load_csv(args.input,
                    ("agent_id", "start_tick", "end_tick", "distance_m"))
    fig, ax = build_figure(rows, bins=args.bins)
    finish(fig, ax, args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
