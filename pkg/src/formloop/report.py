"""Render the dashboard payload to figure files.

The CLI report path writes these next to the delimited results: the
objective scatter with marginal distributions (Pareto points in red,
dominated in blue, excluded crossed out), posterior-mean contour panels per
objective, and the hypervolume trace.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

PARETO_COLOR = "#d62728"
DOMINATED_COLOR = "#1f77b4"
EXCLUDED_COLOR = "#7f7f7f"


def render_report(payload: dict, outdir: str | Path, dpi: int = 130) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = [_scatter_with_marginals(payload, outdir, dpi)]
    written.extend(_contour_sheets(payload, outdir, dpi))
    hv = _hypervolume_figure(payload, outdir, dpi)
    if hv is not None:
        written.append(hv)
    return written


def _objective_names(payload: dict) -> list[str]:
    return [o["name"] for o in payload["objectives"]]


def _scatter_with_marginals(payload: dict, outdir: Path, dpi: int) -> Path:
    names = _objective_names(payload)
    points = payload["points"]
    fig = plt.figure(figsize=(7.2, 6.4))
    grid = fig.add_gridspec(
        2, 2, width_ratios=(4, 1.2), height_ratios=(1.2, 4), hspace=0.06, wspace=0.06
    )
    ax = fig.add_subplot(grid[1, 0])
    ax_top = fig.add_subplot(grid[0, 0], sharex=ax)
    ax_right = fig.add_subplot(grid[1, 1], sharey=ax)

    groups = {
        "pareto": [p for p in points if p["pareto"] and not p["excluded"]],
        "dominated": [p for p in points if not p["pareto"] and not p["excluded"]],
        "excluded": [p for p in points if p["excluded"]],
    }
    styles = {
        "pareto": dict(color=PARETO_COLOR, label="Pareto", zorder=3),
        "dominated": dict(color=DOMINATED_COLOR, label="dominated", zorder=2),
        "excluded": dict(color=EXCLUDED_COLOR, label="excluded", marker="x", zorder=2),
    }
    for key, group in groups.items():
        if not group:
            continue
        x = [p["formation_time_h"] for p in group]
        y = [p["eol_cycles"] for p in group]
        xe = [p["formation_time_se_h"] for p in group]
        ye = [p["eol_se_cycles"] for p in group]
        style = styles[key]
        marker = style.pop("marker", "o")
        ax.errorbar(
            x, y, xerr=xe, yerr=ye, fmt=marker, ms=6, capsize=2, ls="none", **style
        )
        for p in group:
            ax.annotate(
                str(p["batch"]),
                (p["formation_time_h"], p["eol_cycles"]),
                textcoords="offset points",
                xytext=(4, 4),
                fontsize=7,
            )
        style["marker"] = marker

    for marginal in payload["marginals"]:
        edges = np.asarray(marginal["edges"])
        centers = 0.5 * (edges[:-1] + edges[1:])
        widths = np.diff(edges)
        target = ax_top if marginal["objective"] == names[0] else ax_right
        if marginal["objective"] == names[0]:
            target.bar(centers, marginal["dominated_counts"], width=widths, color=DOMINATED_COLOR, alpha=0.7)
            target.bar(centers, marginal["pareto_counts"], width=widths, color=PARETO_COLOR, alpha=0.8,
                       bottom=marginal["dominated_counts"])
        else:
            target.barh(centers, marginal["dominated_counts"], height=widths, color=DOMINATED_COLOR, alpha=0.7)
            target.barh(centers, marginal["pareto_counts"], height=widths, color=PARETO_COLOR, alpha=0.8,
                        left=marginal["dominated_counts"])
    ax_top.tick_params(labelbottom=False)
    ax_right.tick_params(labelleft=False)
    ax.set_xlabel("formation time [h]")
    ax.set_ylabel("EOL [cycles]")
    ax.legend(loc="lower right", fontsize=8)
    path = outdir / "objective_space.png"
    fig.savefig(path, dpi=dpi, bbox_inches="tight")
    plt.close(fig)
    return path


def _contour_sheets(payload: dict, outdir: Path, dpi: int) -> list[Path]:
    written = []
    contours = payload.get("contours", [])
    for objective in _objective_names(payload):
        panels = [c for c in contours if c["objective"] == objective]
        if not panels:
            continue
        fig, axes = plt.subplots(1, len(panels), figsize=(4.2 * len(panels), 3.6))
        axes = np.atleast_1d(axes)
        for ax, panel in zip(axes, panels):
            X = np.asarray(panel["x_values"])
            Y = np.asarray(panel["y_values"])
            Z = np.asarray(panel["mean"])
            cs = ax.contourf(X, Y, Z.T, levels=18, cmap="viridis")
            fig.colorbar(cs, ax=ax, shrink=0.9)
            fixed = ", ".join(f"{k}={v:g}" for k, v in panel["fixed"].items())
            ax.set_xlabel(panel["x"])
            ax.set_ylabel(panel["y"])
            ax.set_title(f"{objective} ({fixed})", fontsize=9)
        fig.tight_layout()
        path = outdir / f"contours_{objective}.png"
        fig.savefig(path, dpi=dpi)
        plt.close(fig)
        written.append(path)
    return written


def _hypervolume_figure(payload: dict, outdir: Path, dpi: int) -> Path | None:
    trace = payload.get("hypervolume_trace", [])
    if not trace:
        return None
    fig, ax = plt.subplots(figsize=(5.6, 3.4))
    ax.step(
        [t["iteration"] for t in trace],
        [t["hypervolume"] for t in trace],
        where="post",
        color=PARETO_COLOR,
    )
    ax.set_xlabel("completed batches")
    ax.set_ylabel("dominated hypervolume")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = outdir / "hypervolume_trace.png"
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path
