#!/usr/bin/env python3
"""Plot the CSV output of `nosmc simulate`.

    python scripts/plot_trace.py out/example41
    python scripts/plot_trace.py out/uav-mission --save mission.png
"""

import argparse
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd

AXES = ["x", "y", "z", "psi", "theta", "phi"]
EVENT_STYLE = {"tc": "tab:green", "gainUpdate": "tab:purple", "surfaceHit": "tab:red", "refJump": "k"}


def mark_events(ax, events):
    for kind, t in events.itertuples(index=False):
        ax.axvline(t, color=EVENT_STYLE.get(kind, "gray"), lw=0.8, ls="--")


def plot_scalar(run: Path):
    tr = pd.read_csv(run / "trace.csv")
    ev = pd.read_csv(run / "events.csv")
    fig, axs = plt.subplots(3, 1, sharex=True, figsize=(8, 7))
    axs[0].plot(tr.t, tr.e1, label="e1")
    axs[0].plot(tr.t, tr.e2, label="e2")
    axs[1].plot(tr.t, tr.sigma, color="tab:orange", label="switching value")
    axs[2].plot(tr.t, tr.u, lw=0.6, label="u")
    axs[2].plot(tr.t, tr.d, label="d")
    for ax in axs:
        mark_events(ax, ev)
        ax.legend(loc="upper right")
        ax.grid(alpha=0.3)
    axs[-1].set_xlabel("t [s]")
    fig.suptitle(run.name)
    return fig


def plot_uav(run: Path):
    fig, axs = plt.subplots(3, 2, sharex=True, figsize=(11, 8))
    for ax, name in zip(axs.T.flat, AXES):
        tr = pd.read_csv(run / f"{name}.csv")
        ax.plot(tr.t, tr["ref"], "k--", lw=0.8, label="reference")
        ax.plot(tr.t, tr.pos, label=name)
        mark_events(ax, pd.read_csv(run / f"{name}_events.csv"))
        ax.legend(loc="upper right")
        ax.grid(alpha=0.3)
    for ax in axs[-1]:
        ax.set_xlabel("t [s]")
    fig.suptitle(run.name)
    return fig


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("run", type=Path, help="output directory of a simulate run")
    p.add_argument("--save", type=Path, help="write the figure instead of showing it")
    args = p.parse_args()
    fig = plot_uav(args.run) if (args.run / "x.csv").exists() else plot_scalar(args.run)
    if args.save:
        fig.savefig(args.save, dpi=150, bbox_inches="tight")
    else:
        plt.show()


if __name__ == "__main__":
    main()
