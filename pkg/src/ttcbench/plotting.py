"""Sweep figures: success rate vs budget, one line per algorithm.

Output is SVG with a fixed hash salt and stripped date metadata so identical
rows produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .harness import SweepRow  # noqa: E402

_SVG_SALT = "ttcbench"


def render_sweep_svg(rows: list[SweepRow], path) -> None:
    """One line series per algorithm; x = budget (log2 scale), y = success
    rate, with a translucent band whose half-width is the bootstrap CI
    half-width of the mean regret."""
    by_algo: dict[str, list[SweepRow]] = {}
    for r in rows:
        by_algo.setdefault(r.algorithm, []).append(r)
    with plt.rc_context({"svg.hashsalt": _SVG_SALT}):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for algo in sorted(by_algo):
            series = sorted(by_algo[algo], key=lambda r: r.n)
            xs = [r.n for r in series]
            ys = [r.success_rate for r in series]
            half = [(r.ci95_hi - r.ci95_lo) / 2.0 for r in series]
            line, = ax.plot(xs, ys, marker="o", label=algo)
            ax.fill_between(xs,
                            [max(0.0, y - h) for y, h in zip(ys, half)],
                            [min(1.0, y + h) for y, h in zip(ys, half)],
                            alpha=0.2, color=line.get_color(), linewidth=0)
        ax.set_xscale("log", base=2)
        ax.set_xlabel("budget n")
        ax.set_ylabel("success rate")
        ax.set_ylim(-0.02, 1.02)
        ax.legend()
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(Path(path), format="svg", metadata={"Date": None})
        plt.close(fig)
