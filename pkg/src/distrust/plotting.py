"""Static figures for evaluation reports, written as self-contained SVG."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "svg.fonttype": "path",     # glyphs as paths: no font files referenced
    "svg.hashsalt": "distrust",  # stable element ids across runs
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}
CLASS_SERIES = (("accuracy", "Accuracy", "#4c72b0"), ("f1", "F1", "#55a868"),
                ("fpr", "FPR", "#c44e52"), ("fnr", "FNR", "#8172b2"))


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format=path.suffix.lstrip(".") or "svg", metadata={"Date": None},
                bbox_inches="tight")
    plt.close(fig)
    return path


def bucket_chart(report, path) -> Path:
    """Grouped bars per non-empty distrust bucket; empty buckets are listed in the legend."""
    filled = [(i, b) for i, b in enumerate(report.buckets) if b.count]
    empty = [b.label for b in report.buckets if not b.count]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(7.0, 3.6))
        xs = np.arange(len(filled))
        if report.task == "classification":
            width = 0.8 / len(CLASS_SERIES)
            for s, (attr, name, color) in enumerate(CLASS_SERIES):
                ys = [getattr(b, attr) for _, b in filled]
                ys = [np.nan if y is None else y for y in ys]
                ax.bar(xs + (s - 1.5) * width, ys, width, label=name, color=color)
            ax.set_ylim(0, 1.05)
            ax.set_ylabel("score")
        else:
            ax.bar(xs, [b.mean_rss for _, b in filled], 0.6, label="mean RSS", color="#4c72b0")
            ax.set_ylabel("mean squared error")
        ax.set_xticks(xs)
        ax.set_xticklabels([f"{b.label}\nn={b.count}" for _, b in filled])
        ax.set_xlabel(f"{report.measure.upper()} bucket")
        rho = report.spearman_rho
        ax.set_title(f"{report.measure.upper()} vs model error"
                     + (f" (Spearman {rho:.2f})" if rho is not None else ""))
        handles, labels = ax.get_legend_handles_labels()
        if empty:
            handles.append(plt.Line2D([], [], linestyle="none"))
            labels.append("omitted (empty): " + ", ".join(empty))
        ax.legend(handles, labels, fontsize=7, frameon=False, loc="upper left",
                  bbox_to_anchor=(1.0, 1.0))
        return _save(fig, path)


def distrust_map(grid_points, values, path, title: str = "", train_points=None) -> Path:
    """Colour a square query lattice by a distrust measure (green trusted, red not)."""
    G = np.asarray(grid_points)
    side = int(round(np.sqrt(len(G))))
    img = np.asarray(values, dtype=np.float64).reshape(side, side)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 3.6))
        im = ax.imshow(img, origin="lower", extent=(0, 1, 0, 1), cmap="RdYlGn_r",
                       vmin=0.0, vmax=1.0, interpolation="nearest")
        if train_points is not None:
            P = np.asarray(train_points)
            ax.scatter(P[:, 0], P[:, 1], s=2, c="k", alpha=0.4, linewidths=0)
        fig.colorbar(im, ax=ax, fraction=0.046)
        ax.set_title(title)
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
        return _save(fig, path)
