"""Regenerate both figure datasets and, if matplotlib is present, plot them.

    python scripts/reproduce_figures.py --out results --threads auto
"""

from __future__ import annotations

import argparse
import csv
from collections import defaultdict
from pathlib import Path

from keygraph_lab.cli import main as cli_main


def plot_fig1(run_dir: Path) -> None:
    import matplotlib.pyplot as plt

    series = defaultdict(lambda: ([], [], []))
    with open(run_dir / "empirical.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            m, emp, poi = series[int(row["h"])]
            m.append(int(row["M"]))
            emp.append(float(row["empirical_prob"]))
            poi.append(float(row["poisson_prob"]))
    fig, ax = plt.subplots(figsize=(6, 4))
    for h, (m, emp, poi) in sorted(series.items()):
        ax.plot(m, emp, "o", ms=3, label=f"h={h} simulation")
        ax.plot(m, poi, "-", label=f"h={h} Poisson")
    ax.set_xlabel("M")
    ax.set_ylabel("P[number of degree-h nodes = M]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(run_dir / "fig1.png", dpi=150)


def plot_fig2(run_dir: Path) -> None:
    import matplotlib.pyplot as plt

    series = defaultdict(lambda: ([], [], []))
    with open(run_dir / "sweep.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            K, emp, ana = series[int(row["k"])]
            K.append(int(row["K"]))
            emp.append(float(row["empirical_prob"]))
            ana.append(float(row["analytic_prob"]))
    fig, ax = plt.subplots(figsize=(6, 4))
    for k, (K, emp, ana) in sorted(series.items()):
        ax.plot(K, emp, "o", label=f"k={k} simulation")
        ax.plot(K, ana, "-", label=f"k={k} limit")
    ax.set_xlabel("K")
    ax.set_ylabel("P[min degree >= k]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(run_dir / "fig2.png", dpi=150)


def run() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="results")
    parser.add_argument("--threads", default="auto")
    parser.add_argument("--seed", default="0")
    parser.add_argument("--trials", default="2000")
    parser.add_argument("--no-plot", action="store_true")
    args = parser.parse_args()

    out = Path(args.out)
    common = ["--threads", args.threads, "--seed", args.seed, "--trials", args.trials]
    for name in ("fig1", "fig2"):
        status = cli_main([name, *common, "--out", str(out / name)])
        if status:
            raise SystemExit(status)
    if args.no_plot:
        return
    try:
        plot_fig1(out / "fig1")
        plot_fig2(out / "fig2")
    except ImportError:
        print("matplotlib not installed; skipping plots")


if __name__ == "__main__":
    run()
