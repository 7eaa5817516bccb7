"""Figures for fuzz reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .harness import SOUNDNESS_BUGS, VERDICT_KINDS, FuzzReport  # noqa: E402


def plot_verdicts(rep: FuzzReport, path) -> None:
    """Bar chart of verdict counts; soundness bugs drawn in red."""
    counts = [rep.histogram[k] for k in VERDICT_KINDS]
    colors = ["tab:red" if k in SOUNDNESS_BUGS else "tab:blue" for k in VERDICT_KINDS]
    fig, ax = plt.subplots(figsize=(7, 3.5))
    bars = ax.bar(VERDICT_KINDS, counts, color=colors)
    ax.bar_label(bars)
    ax.set_ylabel("cases")
    ax.set_title(f"verdicts, seed {rep.config.seed}, engine {rep.engine} ({rep.cases} cases)")
    ax.set_yscale("symlog")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
