"""Figures written next to the CSV reports."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

METRIC_ORDER = ("NSS", "sAUC", "SIM", "CC")

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _finite(v):
    return v if v is not None and not (isinstance(v, float) and math.isnan(v)) else float("nan")


def plot_sweep(rows, path: str | Path) -> Path:
    """Metric vs temporal window, with the full model as a dashed line.

    ``rows`` are ``SweepRow`` objects; the one without ``window_us`` is the
    full model.
    """
    fixed = [r for r in rows if r.window_us is not None]
    full = [r for r in rows if r.window_us is None]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 4, figsize=(10, 2.6))
        for ax, metric in zip(axes, METRIC_ORDER):
            xs = [r.window_us / 1000 for r in fixed]
            ys = [_finite(r.scores[metric][0]) for r in fixed]
            ax.plot(xs, ys, "o-", color="C0", label="single window")
            if full:
                ax.axhline(_finite(full[0].scores[metric][0]), color="C3", ls="--", label="all windows")
            if len(xs) > 1:
                ax.set_xscale("log", base=2)
                ax.set_xticks(xs, [f"{x:g}" for x in xs])
                ax.minorticks_off()
            ax.set_xlabel("window (ms)")
            ax.set_title(metric)
        axes[0].legend(frameon=False)
        fig.tight_layout()
        path = Path(path)
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_report(rows: Sequence[dict], path: str | Path) -> Path:
    """Bar chart of per-video metric means from report rows
    (dicts with video_id, metric, value)."""
    videos = sorted({r["video_id"] for r in rows if r["video_id"] != "*"})
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 4, figsize=(10, 2.6))
        for ax, metric in zip(axes, METRIC_ORDER):
            vals = []
            for v in videos:
                match = [r["value"] for r in rows if r["video_id"] == v and r["metric"] == metric]
                vals.append(_finite(match[0]) if match else float("nan"))
            ax.bar(range(len(videos)), vals, color="C0")
            ax.set_xticks(range(len(videos)))
            ax.set_xticklabels(videos, rotation=45, ha="right")
            ax.set_title(metric)
        fig.tight_layout()
        path = Path(path)
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_frame(values, path: str | Path, title: str | None = None) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4, 3.2))
        im = ax.imshow(values, cmap="gray", vmin=0.0, vmax=1.0, interpolation="nearest")
        fig.colorbar(im, ax=ax, shrink=0.8)
        if title:
            ax.set_title(title)
        ax.set_axis_off()
        path = Path(path)
        fig.savefig(path)
        plt.close(fig)
    return path
