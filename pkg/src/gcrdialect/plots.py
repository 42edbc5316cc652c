"""Matplotlib figures for evaluation reports."""

from __future__ import annotations

import re
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluation import EvalReport  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.titlesize": 11,
    "axes.labelsize": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_").lower() or "report"


def plot_confusion(report: EvalReport, path: str | Path) -> Path:
    """Heatmap of the summed confusion matrix, rows normalized, raw counts annotated."""
    counts = report.confusion.counts
    rows = counts.sum(axis=1, keepdims=True)
    share = np.divide(counts, rows, out=np.zeros(counts.shape, dtype=float), where=rows > 0)
    labels = [t.display_name for t in report.tag_set]
    with plt.rc_context(STYLE):
        size = 1.2 + 0.9 * len(labels)
        fig, ax = plt.subplots(figsize=(size + 1.5, size))
        im = ax.imshow(share, cmap="Blues", vmin=0.0, vmax=1.0)
        for i in range(counts.shape[0]):
            for j in range(counts.shape[1]):
                ax.text(j, i, str(counts[i, j]), ha="center", va="center",
                        color="white" if share[i, j] > 0.6 else "black", fontsize=9)
        ax.set_xticks(range(len(labels)), labels, rotation=35, ha="right")
        ax.set_yticks(range(len(labels)), labels)
        ax.set_xlabel("predicted")
        ax.set_ylabel("true")
        ax.set_title(f"{report.name}: mean accuracy {100 * report.mean_accuracy:.2f}%")
        fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04, label="row share")
        path = Path(path)
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_accuracies(reports: list[EvalReport], path: str | Path) -> Path:
    """Mean cross-validated accuracy per configuration with fold min/max whiskers."""
    names = [r.name for r in reports]
    means = np.array([100 * r.mean_accuracy for r in reports])
    lo = means - np.array([100 * min(r.fold_accuracies) for r in reports])
    hi = np.array([100 * max(r.fold_accuracies) for r in reports]) - means
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(7.5, 0.45 * len(reports) + 1.2))
        y = np.arange(len(reports))[::-1]
        ax.barh(y, means, color="#4878a8")
        ax.errorbar(means, y, xerr=np.vstack([lo, hi]), fmt="none", ecolor="#333333", capsize=3)
        for yi, r, m, h in zip(y, reports, means, hi):
            star = "*" if any(s.significant for s in r.significance.values()) else ""
            ax.text(m + h + 1.0, yi, f"{m:.2f}{star}", va="center", fontsize=8)
        ax.set_yticks(y, names)
        ax.set_xlim(0, 112)
        ax.set_xlabel("accuracy (%)")
        ax.set_title("Cross-validated accuracy by feature set")
        path = Path(path)
        fig.savefig(path)
        plt.close(fig)
    return path


def save_report_figures(reports: list[EvalReport], outdir: str | Path) -> list[Path]:
    """Write one accuracy chart plus one confusion heatmap per report."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = [plot_accuracies(reports, outdir / "accuracy.png")]
    for r in reports:
        written.append(plot_confusion(r, outdir / f"confusion_{_slug(r.name)}.png"))
    return written
