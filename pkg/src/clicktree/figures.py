"""Matplotlib renderings of the report tables, saved next to the CSVs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_BAR_COLOR = "#4878a8"
_ACCENT_COLOR = "#c44e52"
_DPI = 150


def _save(fig, path: str) -> None:
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)


def difficulty_figure(rows, title: str, path: str, top: int = 15) -> None:
    """Horizontal bars of mean score per group, hardest at the top."""
    shown = rows[:top]
    labels = [r.group for r in shown][::-1]
    values = [r.mean_score for r in shown][::-1]
    fig, ax = plt.subplots(figsize=(7, max(2.5, 0.35 * len(shown) + 1)))
    ax.barh(np.arange(len(shown)), values, color=_BAR_COLOR)
    ax.set_yticks(np.arange(len(shown)))
    ax.set_yticklabels(labels, fontsize=8)
    ax.set_xlabel("average score")
    ax.set_xlim(0, 1)
    ax.set_title(title, fontsize=10)
    for i, v in enumerate(values):
        ax.text(v + 0.01, i, f"{v:.2f}", va="center", fontsize=7)
    _save(fig, path)


def cohort_figure(rows, path: str) -> None:
    """Grouped bars: struggling vs successful mean action counts."""
    labels = [r.action for r in rows]
    strug = [r.mean_struggling for r in rows]
    succ = [r.mean_successful for r in rows]
    y = np.arange(len(rows))
    fig, ax = plt.subplots(figsize=(7, 0.45 * len(rows) + 1.5))
    ax.barh(y - 0.2, strug, height=0.4, color=_ACCENT_COLOR, label="struggling")
    ax.barh(y + 0.2, succ, height=0.4, color=_BAR_COLOR, label="successful")
    ax.set_yticks(y)
    bold = {r.action for r in rows if r.significant}
    ax.set_yticklabels(
        [f"{name} *" if name in bold else name for name in labels], fontsize=8
    )
    ax.invert_yaxis()
    ax.set_xlabel("mean in-unit action count")
    ax.set_title("successful vs struggling rows (* significant at 0.01)", fontsize=10)
    ax.legend(fontsize=8)
    _save(fig, path)


def importance_figure(items, path: str, top: int = 10) -> None:
    """Top feature importances as horizontal bars."""
    shown = [(name, value) for name, value in items[:top] if value > 0] or items[:1]
    labels = [name for name, _ in shown][::-1]
    values = [value for _, value in shown][::-1]
    fig, ax = plt.subplots(figsize=(7, 0.4 * len(shown) + 1.5))
    ax.barh(np.arange(len(shown)), values, color=_BAR_COLOR)
    ax.set_yticks(np.arange(len(shown)))
    ax.set_yticklabels(labels, fontsize=8)
    ax.set_xlabel("normalized split score reduction")
    ax.set_title("top feature importances", fontsize=10)
    _save(fig, path)


def training_curves_figure(history: dict, path: str) -> None:
    """Training and validation cross-entropy per iteration."""
    fig, ax = plt.subplots(figsize=(6, 4))
    if history.get("train_ce"):
        ax.plot(
            np.arange(1, len(history["train_ce"]) + 1),
            history["train_ce"],
            label="train CE",
            color=_BAR_COLOR,
        )
    if history.get("valid_ce"):
        ax.plot(
            np.arange(len(history["valid_ce"])),
            history["valid_ce"],
            label="valid CE",
            color=_ACCENT_COLOR,
        )
    ax.set_xlabel("iteration")
    ax.set_ylabel("weighted cross-entropy")
    ax.legend(fontsize=8)
    _save(fig, path)
