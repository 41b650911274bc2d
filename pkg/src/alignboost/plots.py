"""Deterministic SVG plot emission for curve and dependence exports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .align import PDPCurve
from .metrics import CurvePoint

# Fixed hash salt and no date metadata keep SVG output byte-reproducible.
matplotlib.rcParams["svg.hashsalt"] = "alignboost"

_COLORS = {
    "constrained": "#1f77b4",
    "unconstrained": "#ff7f0e",
    "opposite": "#2ca02c",
    "pair": "#1f77b4",
}


def _save(fig, path) -> None:
    fig.savefig(Path(path), format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_curves_svg(
    series: dict[str, list[CurvePoint]],
    title: str,
    ylabel: str,
    path,
    log_x: bool = True,
) -> None:
    """One line with a shaded 95% CI band per series, across train sizes."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in sorted(series):
        points = series[name]
        xs = [p.train_size for p in points]
        means = [p.mean for p in points]
        ax.plot(xs, means, marker="o", markersize=3, label=name, color=_COLORS.get(name))
        ax.fill_between(
            xs,
            [p.ci_low for p in points],
            [p.ci_high for p in points],
            alpha=0.2,
            color=_COLORS.get(name),
        )
    if log_x:
        ax.set_xscale("log")
    ax.set_xlabel("train set size")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def emit_pdp_svg(curve: PDPCurve, path, direction: int | None = None) -> None:
    """Mean predicted probability per grid value with a two-SE band."""
    fig, ax = plt.subplots(figsize=(6, 4))
    lo = [m - 2 * s for m, s in zip(curve.mean, curve.se)]
    hi = [m + 2 * s for m, s in zip(curve.mean, curve.se)]
    ax.plot(curve.grid, curve.mean, marker="o", markersize=3, color="#1f77b4")
    ax.fill_between(curve.grid, lo, hi, alpha=0.2, color="#1f77b4")
    ax.set_xlabel(curve.feature)
    ax.set_ylabel("mean predicted probability")
    title = f"partial dependence: {curve.feature}"
    if direction:
        title += f" (expected {'non-decreasing' if direction > 0 else 'non-increasing'})"
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)
