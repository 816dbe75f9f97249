"""Report figures written next to the JSON/text/CSV outputs."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ssod.core import DatasetManifest, Detection  # noqa: E402
from ssod.curation import CountsTable  # noqa: E402
from ssod.metrics import ClassificationReport, MetricsReport, pr_curve  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.8),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_pr_curves(
    preds: Mapping[str, Sequence[Detection]],
    truth: DatasetManifest,
    report: MetricsReport,
    out_dir: str | os.PathLike,
) -> list[Path]:
    """One precision-recall figure per evaluated class at IoU 0.50."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    with plt.rc_context(STYLE):
        for c in report.evaluated_classes:
            recall, precision = pr_curve(preds, truth, c, 0.5)
            fig, ax = plt.subplots()
            if recall.size:
                ax.step(recall, precision, where="post", lw=1.4)
            ax.set_xlim(0, 1.02)
            ax.set_ylim(0, 1.02)
            ax.set_xlabel("Recall")
            ax.set_ylabel("Precision")
            name = report.class_names[c]
            ax.set_title(f"{name}  AP@50 = {report.class_ap50(c):.3f}")
            paths.append(_save(fig, out / f"pr_{name}.png"))
    return paths


def plot_confusion(report: ClassificationReport, path: str | os.PathLike) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.6, 3.2))
        cm = report.confusion
        ax.imshow(cm, cmap="Blues")
        ax.grid(False)
        for i in range(2):
            for j in range(2):
                ax.text(j, i, str(cm[i][j]), ha="center", va="center")
        ax.set_xticks([0, 1], ["pred 0", "pred 1"])
        ax.set_yticks([0, 1], ["true 0", "true 1"])
        ax.set_title(f"F1 = {report.f1:.3f}")
        return _save(fig, Path(path))


def plot_class_counts(table: CountsTable, path: str | os.PathLike) -> Path:
    """Stacked per-group box counts for each class."""
    groups = sorted(table.per_group)
    classes = sorted(table.class_names)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        bottom = [0] * len(classes)
        labels = [table.class_names[c] for c in classes]
        for g in groups:
            vals = [table.per_group[g][c] for c in classes]
            ax.bar(labels, vals, bottom=bottom, label=g or "(no group)")
            bottom = [b + v for b, v in zip(bottom, vals)]
        ax.set_ylabel("boxes")
        ax.legend()
        return _save(fig, Path(path))
