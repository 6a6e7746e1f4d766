"""Rate-trend figures rendered from report files."""

from __future__ import annotations

import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .report import read_report


def plot_rates(report_paths: list[str | os.PathLike], out_path: str | os.PathLike) -> str:
    """Render processing rate against input volume, one line per
    (workload, engine) series, and save the figure."""
    series = defaultdict(list)
    for path in report_paths:
        for row in read_report(path):
            series[(row["workload"], row["engine"])].append(
                (row["bytes"], row["rate"])
            )
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for (workload, engine), points in sorted(series.items()):
        points.sort()
        xs = [b / 1e6 for b, _ in points]
        ys = [r / 1e6 for _, r in points]
        ax.plot(xs, ys, marker="o", label=f"{workload} ({engine})")
    ax.set_xlabel("input volume (MB)")
    ax.set_ylabel("processing rate (MB/s)")
    ax.set_xscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return str(out_path)
