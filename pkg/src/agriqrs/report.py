"""Report rendering: delimited tables plus matplotlib figures.

Every eval/bench subcommand writes a CSV of its numbers and a PNG
figure next to it in the same output directory.
"""

from __future__ import annotations

import csv
import math
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evalharness import EvalReport, RetrievalEvalRow
from .simcluster import BenchRow

BENCH_CSV = "bench.csv"
BENCH_FIG = "bench_timing.png"
CLUSTER_CSV = "cluster_eval.csv"
CLUSTER_FIG = "cluster_metrics.png"
MAPPER_CSV = "mapper_eval.csv"
MAPPER_FIG = "mapper_eval.png"
RETRIEVAL_CSV = "retrieval_eval.csv"
RETRIEVAL_FIG = "ndcg_vs_k.png"


def _fmt(value) -> str:
    if value is None:
        return ""
    value = float(value)
    if math.isinf(value):
        return "inf"
    return f"{value:.6f}"


def write_bench_outputs(rows: list[BenchRow], out_dir) -> tuple[str, str]:
    """bench.csv plus a log-log timing figure with an n^2 guide line."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, BENCH_CSV)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "n", "seconds", "silhouette", "ch_index", "db_index"])
        for row in rows:
            writer.writerow(
                [
                    row.method,
                    row.n,
                    _fmt(row.seconds),
                    _fmt(row.silhouette),
                    _fmt(row.ch_index),
                    _fmt(row.db_index),
                ]
            )

    fig, ax = plt.subplots(figsize=(7, 5))
    methods = sorted({r.method for r in rows})
    for method in methods:
        pts = sorted((r.n, r.seconds) for r in rows if r.method == method)
        ax.loglog([p[0] for p in pts], [p[1] for p in pts], marker="o", label=method)
    anchor = sorted((r.n, r.seconds) for r in rows if r.method == "threshold")
    if anchor:
        n0, t0 = anchor[0]
        ns = np.array([p[0] for p in anchor], dtype=float)
        ax.loglog(ns, t0 * (ns / n0) ** 2, "k--", alpha=0.5, label="n^2 guide")
    ax.set_xlabel("queries")
    ax.set_ylabel("seconds")
    ax.set_title("clustering runtime")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig_path = os.path.join(out_dir, BENCH_FIG)
    fig.savefig(fig_path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return csv_path, fig_path


def write_cluster_eval(metrics_by_method: dict[str, dict], out_dir) -> tuple[str, str]:
    """cluster_eval.csv plus a comparison figure.

    ``metrics_by_method`` maps method name to a dict with silhouette,
    ch_index, db_index, clusters, points.
    """
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, CLUSTER_CSV)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "silhouette", "ch_index", "db_index", "clusters", "points"])
        for method, m in metrics_by_method.items():
            writer.writerow(
                [
                    method,
                    _fmt(m.get("silhouette")),
                    _fmt(m.get("ch_index")),
                    _fmt(m.get("db_index")),
                    m.get("clusters", ""),
                    m.get("points", ""),
                ]
            )

    methods = list(metrics_by_method)
    fig, axes = plt.subplots(1, 3, figsize=(11, 4))
    for ax, key, title in zip(axes, ("silhouette", "db_index", "ch_index"), (
        "silhouette (higher better)",
        "Davies-Bouldin (lower better)",
        "Calinski-Harabasz (higher better)",
    )):
        vals = [metrics_by_method[m].get(key) for m in methods]
        plotted = [0.0 if v is None or math.isinf(float(v)) else float(v) for v in vals]
        bars = ax.bar(methods, plotted, color=["#4c72b0", "#dd8452"][: len(methods)])
        for bar, v in zip(bars, vals):
            label = "inf" if v is not None and math.isinf(float(v)) else ""
            if label:
                ax.text(bar.get_x() + bar.get_width() / 2, 0, label, ha="center", va="bottom")
        ax.set_title(title, fontsize=10)
        ax.tick_params(axis="x", rotation=20)
    fig.tight_layout()
    fig_path = os.path.join(out_dir, CLUSTER_FIG)
    fig.savefig(fig_path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return csv_path, fig_path


def write_mapper_eval(
    report: EvalReport, out_dir, train_losses: list[float] | None = None
) -> tuple[str, str]:
    """mapper_eval.csv (per-class rows, weighted summary last) plus a
    figure with per-class F1, the confusion matrix, and the loss curve."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, MAPPER_CSV)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "precision", "recall", "f1", "support"])
        for cm in report.per_class:
            writer.writerow([cm.label, _fmt(cm.precision), _fmt(cm.recall), _fmt(cm.f1), cm.support])
        writer.writerow(
            [
                "weighted",
                _fmt(report.weighted_precision),
                _fmt(report.weighted_recall),
                _fmt(report.weighted_f1),
                report.n_examples,
            ]
        )
        writer.writerow(["accuracy", _fmt(report.accuracy), "", "", report.n_examples])

    n_panels = 3 if train_losses else 2
    fig, axes = plt.subplots(1, n_panels, figsize=(4 * n_panels, 4))
    labels = [cm.label for cm in report.per_class]
    axes[0].bar(range(len(labels)), [cm.f1 for cm in report.per_class], color="#4c72b0")
    axes[0].set_xlabel("class")
    axes[0].set_ylabel("F1")
    axes[0].set_ylim(0, 1.05)
    axes[0].set_title(f"per-class F1 (accuracy {report.accuracy:.3f})", fontsize=10)
    im = axes[1].imshow(report.confusion, cmap="Blues")
    axes[1].set_xlabel("predicted")
    axes[1].set_ylabel("true")
    axes[1].set_title("confusion", fontsize=10)
    fig.colorbar(im, ax=axes[1], shrink=0.8)
    if train_losses:
        axes[2].plot(range(1, len(train_losses) + 1), train_losses, marker=".")
        axes[2].set_xlabel("epoch")
        axes[2].set_ylabel("training loss")
        axes[2].set_title("loss curve", fontsize=10)
    fig.tight_layout()
    fig_path = os.path.join(out_dir, MAPPER_FIG)
    fig.savefig(fig_path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return csv_path, fig_path


def write_retrieval_eval(rows: list[RetrievalEvalRow], out_dir) -> tuple[str, str]:
    """retrieval_eval.csv plus mean NDCG against k."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, RETRIEVAL_CSV)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "mean_ndcg", "queries_evaluated", "queries_skipped"])
        for row in rows:
            writer.writerow([row.k, _fmt(row.mean_ndcg), row.queries_evaluated, row.queries_skipped])

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([r.k for r in rows], [r.mean_ndcg for r in rows], marker="o")
    ax.set_xlabel("k")
    ax.set_ylabel("mean NDCG@k")
    ax.set_ylim(0, 1.05)
    ax.set_title("retrieval quality")
    ax.grid(alpha=0.3)
    fig_path = os.path.join(out_dir, RETRIEVAL_FIG)
    fig.savefig(fig_path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return csv_path, fig_path
