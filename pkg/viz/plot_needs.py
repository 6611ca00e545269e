"""Need-level traces (hunger, energy deficit, social) and balance for
one agent over simulated days."""

from __future__ import annotations

import sys

import matplotlib.pyplot as plt

from common import finish, load_csv, standard_parser

TICKS_PER_DAY = 1440

NEED_COLUMNS = ("hunger", "energy_deficit", "social")


def build_figure(rows):
    days = [int(r["tick"]) / TICKS_PER_DAY for r in rows]
    fig, ax = plt.subplots(figsize=(9, 5))
    for col in NEED_COLUMNS:
        ax.plot(days, [float(r[col]) for r in rows], label=col)
    ax.set_xlabel("day")
    ax.set_ylabel("need level (0-1)")
    ax.set_ylim(-0.05, 1.05)
    bal_ax = ax.twinx()
    bal_ax.plot(days, [float(r["balance"]) for r in rows],
                color="black", linestyle="--", label="balance")
    bal_ax.set_ylabel("balance (currency)")
    handles, labels = ax.get_legend_handles_labels()
    bh, bl = bal_ax.get_legend_handles_labels()
    ax.legend(handles + bh, labels + bl, loc="upper right")
    return fig, ax


def main(argv=None) -> int:
    parser = standard_parser("Plot one agent's need levels over time")
    args = parser.parse_args(argv)
    rows = load_csv(args.input,
                    ("tick",) + NEED_COLUMNS + ("balance",))
    fig, ax = build_figure(rows)
    finish(fig, ax, args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
