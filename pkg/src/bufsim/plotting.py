"""Figures for run and comparison reports.

Everything renders through the Agg backend to files; nothing is shown
interactively.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .harness import RunReport  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 120,
}

POLICY_COLORS = {
    "clock": "#7f7f7f",
    "pbm-sampling": "#1f77b4",
    "evolved": "#d62728",
    "belady": "#2ca02c",
}


def _ordered(values: Sequence[str]) -> list[str]:
    seen = []
    for v in values:
        if v not in seen:
            seen.append(v)
    return seen


def _grouped_bars(ax, reports: Sequence[RunReport], metric: str, ylabel: str) -> None:
    traces = _ordered([r.trace for r in reports])
    policies = _ordered([r.policy for r in reports])
    width = 0.8 / max(len(policies), 1)
    for k, policy in enumerate(policies):
        ys = []
        for t in traces:
            vals = [getattr(r, metric) for r in reports if r.trace == t and r.policy == policy]
            ys.append(sum(vals) / len(vals) if vals else 0.0)
        xs = [i + (k - (len(policies) - 1) / 2) * width for i in range(len(traces))]
        ax.bar(xs, ys, width, label=policy, color=POLICY_COLORS.get(policy))
    ax.set_xticks(range(len(traces)))
    ax.set_xticklabels(traces, rotation=30, ha="right")
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False)


def render_figures(reports: Sequence[RunReport], outdir: str | Path,
                   fmt: str = "png") -> list[Path]:
    """Write hit-rate, latency-score and I/O-breakdown figures; return their paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    with plt.rc_context(STYLE):
        for metric, label, name in (("hit_rate", "hit rate", "hit_rate"),
                                    ("latency_score", "latency score", "latency_score")):
            fig, ax = plt.subplots(figsize=(6, 3.2))
            _grouped_bars(ax, reports, metric, label)
            fig.tight_layout()
            path = outdir / f"{name}.{fmt}"
            fig.savefig(path)
            plt.close(fig)
            written.append(path)

        policies = _ordered([r.policy for r in reports])
        parts = {"seq reads": [], "random reads": [], "dirty write-backs": []}
        for p in policies:
            runs = [r for r in reports if r.policy == p]
            n = len(runs)
            parts["seq reads"].append(sum(r.metrics.seq_misses for r in runs) / n)
            parts["random reads"].append(sum(r.metrics.rand_misses for r in runs) / n)
            parts["dirty write-backs"].append(sum(r.metrics.dirty_evictions for r in runs) / n)
        fig, ax = plt.subplots(figsize=(5, 3.2))
        bottom = [0.0] * len(policies)
        for label, ys in parts.items():
            ax.bar(policies, ys, bottom=bottom, label=label)
            bottom = [b + y for b, y in zip(bottom, ys)]
        ax.set_ylabel("page I/Os per run")
        ax.set_ylim(0, max(max(bottom), 1) * 1.25)  # headroom for the legend
        ax.legend(frameon=False, ncol=3, loc="upper center", fontsize="small")
        fig.tight_layout()
        path = outdir / f"io_breakdown.{fmt}"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written
