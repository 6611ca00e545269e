"""Calibration progress: best score against generation."""

from __future__ import annotations

import sys

import matplotlib.pyplot as plt

from common import finish, load_csv, standard_parser


def build_figure(rows):
    gens = [int(r["generation"]) for r in rows]
    best = [float(r["best_score"]) for r in rows]
    fig, ax = plt.subplots(figsize=(8, 5))
    ax.plot(gens, best, marker="o", label="best score")
    ax.set_xlabel("generation")
    ax.set_ylabel("similarity score")
    ax.legend()
    return fig, ax


def main(argv=None) -> int:
    parser = standard_parser("Plot best calibration score per generation")
    args = parser.parse_args(argv)
    rows = load_csv(args.input, ("generation", "best_score", "pool_size"))
    fig, ax = build_figure(rows)
    finish(fig, ax, args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
