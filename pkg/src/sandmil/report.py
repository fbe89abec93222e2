"""Evaluation report rendering: JSON, aligned text, delimited predictions,
and the matplotlib figures written next to them."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import RateReport

__all__ = ["write_predictions", "write_rate_report", "render_report_figures"]


def write_predictions(
    path, sample_ids: Sequence[str], labels: Sequence[str], scores: Sequence[float]
) -> None:
    """Tab-separated per-sample verdicts."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("sample_id\tlabel\tscore\n")
        for sid, label, score in zip(sample_ids, labels, scores):
            fh.write(f"{sid}\t{label}\t{score:.6f}\n")


def write_rate_report(out_dir, report: RateReport, extra: dict | None = None) -> None:
    out = Path(out_dir)
    payload = report.to_dict()
    if extra:
        payload.update(extra)
    (out / "report.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    (out / "report.txt").write_text(report.to_text() + "\n", encoding="utf-8")


def render_report_figures(
    out_dir,
    report: RateReport,
    scores: Sequence[float],
    y_true: Sequence[str],
) -> list[Path]:
    """Score distribution by true class plus a rate summary, as PNG files."""
    out = Path(out_dir)
    written = []

    scores = np.asarray(scores, dtype=np.float64)
    truths = np.asarray(y_true)
    fig, ax = plt.subplots(figsize=(6, 4))
    bins = np.linspace(0.0, 1.0, 21)
    for cls, color in (("legitimate", "tab:blue"), ("malicious", "tab:red")):
        mask = truths == cls
        if mask.any():
            ax.hist(scores[mask], bins=bins, alpha=0.6, label=cls, color=color)
    ax.set_xlabel("malicious score")
    ax.set_ylabel("samples")
    ax.set_title("Score distribution by true class")
    ax.legend()
    fig.tight_layout()
    path = out / "score_distribution.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    names, values = [], []
    for name in ("tpr", "fnr", "tnr", "fpr", "acc"):
        value = getattr(report, name)
        if value is not None:
            names.append(name.upper())
            values.append(value)
    fig, ax = plt.subplots(figsize=(6, 4))
    bars = ax.bar(names, values, color="tab:gray")
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("rate")
    ax.set_title("Classification rates")
    for bar, value in zip(bars, values):
        ax.text(
            bar.get_x() + bar.get_width() / 2, value + 0.02, f"{value:.3f}", ha="center", fontsize=9
        )
    fig.tight_layout()
    path = out / "rates.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written
