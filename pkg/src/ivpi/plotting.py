"""Figures written next to the delimited report output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.figsize": (4.5, 3.0),
}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_sweep(rows, cap_label: str, path, point_estimate=None):
    """Lower/upper ATE bound against the swept cap; infeasible points are marked on the axis."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ok = [(e, lo, hi) for e, lo, hi in rows if lo is not None]
        bad = [e for e, lo, hi in rows if lo is None]
        if ok:
            eps, lo, hi = zip(*ok)
            ax.fill_between(eps, lo, hi, color="C0", alpha=0.25, lw=0)
            ax.plot(eps, lo, "o-", color="C0", ms=3, label="lower bound")
            ax.plot(eps, hi, "s-", color="C1", ms=3, label="upper bound")
        if bad:
            ax.plot(bad, [0.0] * len(bad), "x", color="C3", label="infeasible")
        if point_estimate is not None:
            ax.axhline(point_estimate, color="0.4", ls="--", lw=0.8, label="Wald")
        ax.axhline(0.0, color="0.7", lw=0.5)
        ax.set_xlabel(cap_label)
        ax.set_ylabel("ATE")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_intervals(labels, intervals, path, point_estimate=None):
    """One horizontal bar per assumption set; ``None`` intervals are drawn as infeasible."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5.0, 0.6 + 0.45 * len(labels)))
        for i, iv in enumerate(intervals):
            if iv is None:
                ax.text(0.0, i, "infeasible", ha="center", va="center", color="C3")
                continue
            ax.plot(iv, [i, i], "-", color="C0", lw=3, solid_capstyle="butt")
            ax.plot(iv, [i, i], "|", color="C0", ms=10)
        if point_estimate is not None:
            ax.axvline(point_estimate, color="0.4", ls="--", lw=0.8)
        ax.axvline(0.0, color="0.7", lw=0.5)
        ax.set_yticks(range(len(labels)))
        ax.set_yticklabels(labels)
        ax.set_ylim(-0.6, len(labels) - 0.4)
        ax.set_xlim(-1.0, 1.0)
        ax.set_xlabel("ATE")
        return _save(fig, path)


def plot_level_weights(us, weights, effects, path, estimand=None):
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        pos = range(len(us))
        ax.bar(pos, weights, color=["C0" if w >= 0 else "C3" for w in weights])
        ax.set_xticks(list(pos))
        ax.set_xticklabels([f"{u:g}" for u in us])
        ax.set_xlabel("preference level")
        ax.set_ylabel("weight in Wald estimand")
        ax.axhline(0.0, color="0.5", lw=0.5)
        ax2 = ax.twinx()
        ax2.spines["right"].set_visible(True)
        ax2.plot(list(pos), effects, "o", color="C1", label="level effect")
        if estimand is not None:
            ax2.axhline(estimand, color="C1", ls="--", lw=0.8, label="Wald estimand")
        ax2.set_ylabel("effect")
        ax2.legend(frameon=False, loc="best")
        return _save(fig, path)
