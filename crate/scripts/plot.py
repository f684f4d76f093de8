#!/usr/bin/env python3
"""Tracking figures from `friday` CSV output.

    python scripts/plot.py out/sine --prefix sine_multi_ --out fig.png

Every `<prefix><controller>_seed<k>.csv` in the directory is grouped by
controller. Top panel: position and reference for seed 0. Bottom panel:
mean |p - p_r| over seeds. A third panel shows r_true / r_hat when the
controller logs an estimate.
"""

import argparse
import re
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

NAME = re.compile(r"^(?P<run>.+)_seed(?P<seed>\d+)\.csv$")
COLORS = {"friday": "tab:blue", "adaptive": "tab:red", "lqr": "tab:pink"}


def load(directory, prefix):
    runs = {}
    for path in sorted(Path(directory).glob(f"{prefix}*_seed*.csv")):
        m = NAME.match(path.name)
        if not m:
            continue
        ctrl = m["run"][len(prefix):] or m["run"]
        df = pd.read_csv(path, comment="#")
        runs.setdefault(ctrl, {})[int(m["seed"])] = df
    return runs


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("directory")
    ap.add_argument("--prefix", default="")
    ap.add_argument("--out", default="figure.png")
    args = ap.parse_args()

    runs = load(args.directory, args.prefix)
    if not runs:
        raise SystemExit(f"no CSV files matching {args.prefix}*_seed*.csv")

    fig, axes = plt.subplots(3, 1, figsize=(7, 9), sharex=True)
    for ctrl, seeds in runs.items():
        color = COLORS.get(ctrl)
        first = seeds[min(seeds)]
        axes[0].plot(first.t, first.p, label=ctrl, color=color)
        err = pd.concat([(d.p - d.pr).abs().rename(s) for s, d in seeds.items()], axis=1)
        axes[1].plot(first.t, err.mean(axis=1), label=ctrl, color=color)
        if first.r_hat.notna().any():
            axes[2].plot(first.t, first.r_hat, label=f"{ctrl} R̂", color=color)
            axes[2].plot(first.t, first.r_true, "k--", lw=0.8, label=f"{ctrl} R")
    any_run = next(iter(next(iter(runs.values())).values()))
    axes[0].plot(any_run.t, any_run.pr, "k:", label="reference")
    axes[0].set_ylabel("p [m]")
    axes[1].set_ylabel("mean |p − p_r| [m]")
    axes[2].set_ylabel("residual [N]")
    axes[2].set_xlabel("t [s]")
    for ax in axes:
        ax.legend(fontsize=8)
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(args.out)


if __name__ == "__main__":
    main()
