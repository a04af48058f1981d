"""Report figures: Pareto curve of the ABC split and service-level/cost curves.

Output is byte-stable across reruns (no timestamps, fixed SVG ids).
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .classify import AbcAssignment  # noqa: E402
from .svclevel import ServiceCurvePoint  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "sparesim",
    "svg.fonttype": "path",
}
CLASS_COLORS = {"A": "#c0392b", "B": "#e67e22", "C": "#7f8c8d"}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    fmt = path.suffix.lstrip(".") or "png"
    meta = {"Date": None} if fmt in ("svg", "pdf") else {"Software": None}
    fig.savefig(path, format=fmt, metadata=meta, dpi=120)
    plt.close(fig)
    return path


def pareto_figure(assignments: Sequence[AbcAssignment], path: str | Path,
                  cuts: tuple[float, float] | None = None) -> Path:
    """Cumulative combined-value share against cumulative share of items."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        n = len(assignments)
        x = [100.0 * a.rank / n for a in assignments]
        y = [100.0 * a.cumulative_value_share for a in assignments]
        ax.plot([0.0, *x], [0.0, *y], color="black", lw=1.0)
        for cls, color in CLASS_COLORS.items():
            pts = [(xi, yi) for xi, yi, a in zip(x, y, assignments) if a.cls == cls]
            if pts:
                ax.scatter(*zip(*pts), s=8, color=color, label=f"class {cls} ({len(pts)})", zorder=3)
        for c in cuts or ():
            ax.axhline(100.0 * c, color="grey", ls="--", lw=0.8)
        ax.set_xlabel("cumulative share of items (%)")
        ax.set_ylabel("cumulative share of combined value (%)")
        ax.set_xlim(0, 100)
        ax.set_ylim(0, 101)
        ax.legend(loc="lower right")
        return _save(fig, Path(path))


def service_curve_figure(points: Sequence[ServiceCurvePoint], path: str | Path, title: str = "") -> Path:
    """Mean total cost (with 95% CI bars) and its holding part against service level."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        labels = [f"{100 * p.alpha:g}" for p in points]
        xs = range(len(points))
        ax.errorbar(xs, [p.total_cost_mean for p in points], yerr=[p.total_cost_ci for p in points],
                    marker="o", ms=4, capsize=3, color="#1f4e79", label="total cost")
        ax.plot(xs, [p.holding for p in points], marker="s", ms=3, ls=":", color="#2e7d32",
                label="holding")
        ax.plot(xs, [p.shortage for p in points], marker="^", ms=3, ls=":", color="#c0392b",
                label="shortage")
        ax.set_xticks(list(xs))
        ax.set_xticklabels(labels)
        ax.set_xlabel("target service level (%)")
        ax.set_ylabel("mean total inventory cost")
        if title:
            ax.set_title(title)
        ax.legend(loc="upper left")
        return _save(fig, Path(path))
