"""Comparison tables, per-class listings, and static plots for reports."""

from __future__ import annotations

import logging
from collections import Counter
from pathlib import Path
from typing import Mapping

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .metrics import EvalReport

logger = logging.getLogger(__name__)


def render_comparison_table(reports: Mapping[str, EvalReport]) -> str:
    """Three-column comparison: Accuracy / F1-score / ANLD, percent-scaled."""
    name_width = max(len("Frameworks"), *(len(n) for n in reports))
    header = f"{'Frameworks':<{name_width}}  {'Accuracy':>8}  {'F1-score':>8}  {'ANLD':>6}"
    rule = "-" * len(header)
    lines = [header, rule]
    for name, r in reports.items():
        lines.append(
            f"{name:<{name_width}}  {100 * r.accuracy:>8.1f}  "
            f"{100 * r.macro_f1:>8.1f}  {100 * r.anld:>6.1f}"
        )
    return "\n".join(lines)


def render_per_class_listing(report: EvalReport) -> str:
    lines = ["label  support  correct  accuracy"]
    for c in report.per_class:
        acc = c.correct / c.support if c.support else 0.0
        lines.append(f"{c.label.text}  {c.support:>7}  {c.correct:>7}  {100 * acc:>7.1f}")
    return "\n".join(lines)


def confusion_pairs(report: EvalReport, top: int = 10) -> list[tuple[str, int]]:
    """Most frequent (position, truth->predicted) digit substitutions.

    Only counts predictions of the full 4-digit length; shorter or longer
    outputs have no stable position alignment.
    """
    counter: Counter[str] = Counter()
    for r in report.records:
        if len(r.prediction) != len(r.ground_truth):
            continue
        for pos, (t, p) in enumerate(zip(r.ground_truth, r.prediction), start=1):
            if t != p:
                counter[f"pos{pos}: {t}->{p}"] += 1
    return counter.most_common(top)


def plot_per_class_accuracy(report: EvalReport, path) -> None:
    labels = [c.label.text for c in report.per_class]
    accs = [100 * c.correct / c.support if c.support else 0.0 for c in report.per_class]
    fig, ax = plt.subplots(figsize=(10, 4))
    ax.bar(labels, accs, color="#3b6ea5")
    ax.set_ylabel("string accuracy (%)")
    ax.set_ylim(0, 100)
    ax.tick_params(axis="x", rotation=90, labelsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_class_distribution(report: EvalReport, path) -> None:
    labels = [c.label.text for c in report.per_class]
    supports = [c.support for c in report.per_class]
    fig, ax = plt.subplots(figsize=(10, 4))
    ax.bar(labels, supports, color="#7a9e57")
    ax.set_ylabel("test samples")
    ax.tick_params(axis="x", rotation=90, labelsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_nld_histogram(report: EvalReport, path) -> None:
    values = [r.nld for r in report.records]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(values, bins=20, range=(0.0, max(1.0, max(values))), color="#a5553b")
    ax.set_xlabel("normalized edit distance")
    ax.set_ylabel("samples")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def emit_report_assets(report: EvalReport, out_dir) -> list[Path]:
    """Write the standard plot set for one report; returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, fn in (
        ("per_class_accuracy.png", plot_per_class_accuracy),
        ("class_distribution.png", plot_class_distribution),
        ("nld_histogram.png", plot_nld_histogram),
    ):
        path = out_dir / name
        fn(report, path)
        written.append(path)
    return written
