"""Figures from the CSV tables written by reproduce.py (needs matplotlib).

Boxplots are drawn from the stored 5/25/50/75/95 percentiles, whiskers at the
5% and 95% levels.
"""

import argparse
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def boxplot_figure(study_dir: Path, target: Path):
    lags, avgs = load(study_dir / "lags.csv"), load(study_dir / "avgs.csv")
    eta = {r["quantity"]: float(r["value"]) for r in load(study_dir / "theory.csv")}["eta"]
    ns = sorted({int(r["n"]) for r in lags})
    fig, axes = plt.subplots(2, 2, figsize=(12, 8), squeeze=False)
    for ax, n in zip(axes.ravel(), ns):
        stats = []
        for rows, key, colour in ((lags, "lag", "tab:blue"), (avgs, "k", "tab:green")):
            for r in rows:
                if int(r["n"]) == n:
                    stats.append(
                        dict(
                            med=float(r["median"]), q1=float(r["q25"]), q3=float(r["q75"]),
                            whislo=float(r["q05"]), whishi=float(r["q95"]),
                            label=("" if key == "lag" else "av") + r[key], colour=colour,
                        )
                    )
        boxes = ax.bxp(stats, showfliers=False, patch_artist=True)
        for patch, s in zip(boxes["boxes"], stats):
            patch.set_facecolor(s["colour"])
        ax.axhline(eta, color="red", lw=0.8)
        ax.set_title(f"n = {n}")
        ax.tick_params(axis="x", labelsize=5, rotation=90)
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    plt.close(fig)


def mse_figure(path: Path, target: Path):
    curves = defaultdict(list)
    ref = []
    for r in load(path):
        curves[r["estimator"]].append((int(r["n"]), float(r["n_mse"])))
        if r["estimator"] == "avg":
            ref.append((int(r["n"]), float(r["reference"])))
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, pts in curves.items():
        ax.plot(*zip(*pts), marker="o", label=name)
    ax.plot(*zip(*ref), "g--", label="first-order expansion")
    ax.set_xscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("n * MSE")
    ax.legend()
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    plt.close(fig)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--results", default="results")
    args = p.parse_args()
    res = Path(args.results)
    for d in sorted(x for x in res.iterdir() if x.is_dir()):
        boxplot_figure(d, res / f"{d.name}.png")
    for f in sorted(res.glob("fig3*.csv")):
        mse_figure(f, res / f"{f.stem}.png")


if __name__ == "__main__":
    main()
