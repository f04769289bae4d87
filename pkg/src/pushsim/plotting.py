"""Figure rendering for preset results: throughput/energy sweeps and the
level/threshold CDF comparison. PNG output next to the CSVs."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

_STYLE = {
    "unicast": dict(color="tab:red", marker="o"),
    "broadcast": dict(color="tab:blue", marker="s"),
    "baseline": dict(color="tab:green", marker="^"),
}


def _read_sweep_csv(path):
    series = defaultdict(lambda: {"x": [], "thr": [], "thr_se": [], "en": [], "en_se": []})
    with open(path, newline="", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            s = series[row["strategy"]]
            s["x"].append(float(row["sweep_value"]))
            s["thr"].append(float(row["mean_throughput_bps"]))
            s["thr_se"].append(float(row["se_throughput"]))
            s["en"].append(float(row["mean_energy_J"]))
            s["en_se"].append(float(row["se_energy"]))
    return series


def render_sweep_figure(csv_path, out_png) -> Path:
    """Two panels, throughput and total energy vs the swept parameter,
    with 95% confidence bars per strategy."""
    series = _read_sweep_csv(csv_path)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    for name, s in series.items():
        style = _STYLE.get(name, {})
        ax1.errorbar(
            s["x"], [v / 1e6 for v in s["thr"]],
            yerr=[1.96 * v / 1e6 for v in s["thr_se"]],
            label=name, capsize=2, **style,
        )
        ax2.errorbar(
            s["x"], s["en"], yerr=[1.96 * v for v in s["en_se"]],
            label=name, capsize=2, **style,
        )
    ax1.set_ylabel("throughput (Mbit/s)")
    ax2.set_ylabel("total energy (J)")
    for ax in (ax1, ax2):
        ax.set_xlabel("sweep value")
        ax.grid(True, alpha=0.4)
        ax.legend(fontsize=8)
    fig.tight_layout()
    out = Path(out_png)
    fig.savefig(out, dpi=160)
    plt.close(fig)
    return out


def render_fig2_figure(samples_csv, out_png) -> Path:
    """Empirical CDFs of the water level and the idle threshold, estimate
    vs offline oracle."""
    cols = defaultdict(list)
    with open(samples_csv, newline="", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            for k, v in row.items():
                cols[k].append(float(v))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    panels = (
        (ax1, "nu_star", "nu_hat", "water level (W)"),
        (ax2, "gth_star", "gth_hat", "idle threshold (1/W)"),
    )
    for ax, star, hat, label in panels:
        for key, style in ((star, dict(color="k", ls="-")), (hat, dict(color="tab:red", ls="--"))):
            xs = sorted(cols[key])
            cdf = [(i + 1) / len(xs) for i in range(len(xs))]
            ax.plot(xs, cdf, label=key, **style)
        ax.set_xscale("log")
        ax.set_xlabel(label)
        ax.set_ylabel("CDF")
        ax.grid(True, alpha=0.4)
        ax.legend(fontsize=8)
    fig.tight_layout()
    out = Path(out_png)
    fig.savefig(out, dpi=160)
    plt.close(fig)
    return out
