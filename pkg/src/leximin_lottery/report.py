"""Figures for a result document.

Each ``plot_*`` function draws onto a fresh figure and returns it; the
caller decides where it goes. :func:`write_figures` renders every figure a
document supports into a directory as PNG files.
"""

from __future__ import annotations

import os
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

PIPELINE_COLOR = "#3b6ea8"
ORACLE_COLOR = "#c0504d"


def plot_sorted_expected(
    pipeline: Sequence[float],
    oracle: Optional[Sequence[float]] = None,
    alpha: Optional[float] = None,
    title: str = "Sorted expected utilities",
):
    """Bars of the sorted expected vector, next to the oracle's when given.

    With ``alpha`` < 1 the scaled oracle vector, which the pipeline must
    leximin-dominate, is drawn as a step line.
    """
    fig, ax = plt.subplots(figsize=(6, 3.6))
    k = np.arange(1, len(pipeline) + 1)
    width = 0.38 if oracle is not None else 0.6
    offset = width / 2 if oracle is not None else 0.0
    ax.bar(k - offset, pipeline, width, color=PIPELINE_COLOR, label="pipeline")
    if oracle is not None:
        ax.bar(k + offset, oracle, width, color=ORACLE_COLOR, label="leximin optimum")
        if alpha is not None and alpha < 1:
            ax.step(k, alpha * np.asarray(oracle), where="mid", color="k", ls="--", lw=1, label=f"{alpha:g} x optimum")
    ax.set_xticks(k)
    ax.set_xlabel("rank (smallest first)")
    ax.set_ylabel("expected utility")
    ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return fig


def plot_rounds(rounds: Sequence[dict]):
    """Frozen value ``z_t`` and binary-search probe count per round."""
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(6, 4.5), sharex=True)
    t = [r["t"] for r in rounds]
    top.plot(t, [r["z"] for r in rounds], "o-", color=PIPELINE_COLOR)
    top.set_ylabel("z_t")
    top.set_title("Main-loop rounds")
    bottom.bar(t, [r["probes"] for r in rounds], color="#8c8c8c", label="probes")
    bottom.plot(t, [r["blackbox_calls"] for r in rounds], "s--", color=ORACLE_COLOR, label="black-box calls")
    bottom.set_yscale("log")
    bottom.set_xlabel("round t")
    bottom.set_xticks(t)
    bottom.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return fig


def plot_lottery(lottery: Sequence[dict], max_rows: int = 20):
    """Horizontal bars of the lottery's probabilities, labelled by outcome."""
    rows = list(lottery)[:max_rows]
    fig, ax = plt.subplots(figsize=(6.5, 0.45 * len(rows) + 1.2))
    labels = [r["outcome"]["text"] for r in rows]
    y = np.arange(len(rows))
    ax.barh(y, [r["probability"] for r in rows], color=PIPELINE_COLOR)
    ax.set_yticks(y)
    ax.set_yticklabels(labels, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlim(0, 1)
    ax.set_xlabel("probability")
    ax.set_title("Lottery")
    fig.tight_layout()
    return fig


def write_figures(document: dict, directory: str, prefix: str = "") -> list[str]:
    """Render the figures ``document`` supports into ``directory``; returns the file paths."""
    os.makedirs(directory, exist_ok=True)
    figures = []
    if "comparison" in document:
        comp = document["comparison"]
        figures.append(("expected", plot_sorted_expected(comp["pipeline_sorted"], comp["oracle_sorted"], comp["alpha"])))
    elif "sorted_expected" in document:
        figures.append(("expected", plot_sorted_expected(document["sorted_expected"])))
    if document.get("rounds"):
        figures.append(("rounds", plot_rounds(document["rounds"])))
    if document.get("lottery"):
        figures.append(("lottery", plot_lottery(document["lottery"])))
    paths = []
    for name, fig in figures:
        path = os.path.join(directory, f"{prefix}{name}.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths
