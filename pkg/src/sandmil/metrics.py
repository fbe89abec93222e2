"""Classification and clustering evaluation: confusion rates, adjusted
rand index, and stratified k-fold grid search."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Callable, Mapping, Sequence

import numpy as np

__all__ = [
    "RateReport",
    "GridSearchResult",
    "confusion_rates",
    "adjusted_rand_index",
    "stratified_folds",
    "kfold_grid_search",
]

POSITIVE = "malicious"


@dataclass
class RateReport:
    """Confusion counts and the rates derived from them.

    Rates with an empty denominator (no positives, or no negatives) are
    reported as None rather than a made-up number.
    """

    tp: int
    fn: int
    tn: int
    fp: int
    tpr: float | None
    fnr: float | None
    tnr: float | None
    fpr: float | None
    acc: float

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fn": self.fn,
            "tn": self.tn,
            "fp": self.fp,
            "tpr": self.tpr,
            "fnr": self.fnr,
            "tnr": self.tnr,
            "fpr": self.fpr,
            "acc": self.acc,
        }

    def to_text(self) -> str:
        rows = [
            ("TP", self.tp),
            ("FN", self.fn),
            ("TN", self.tn),
            ("FP", self.fp),
            ("TPR", self.tpr),
            ("FNR", self.fnr),
            ("TNR", self.tnr),
            ("FPR", self.fpr),
            ("ACC", self.acc),
        ]
        lines = []
        for name, value in rows:
            if value is None:
                rendered = "n/a"
            elif isinstance(value, float):
                rendered = f"{value:.4f}"
            else:
                rendered = str(value)
            lines.append(f"{name:<4} {rendered:>8}")
        return "\n".join(lines)


def confusion_rates(y_true: Sequence, y_pred: Sequence, positive=POSITIVE) -> RateReport:
    """Standard binary rates with ``positive`` as the positive class."""
    if len(y_true) != len(y_pred):
        raise ValueError("y_true and y_pred must have equal length")
    if len(y_true) == 0:
        raise ValueError("need at least one prediction")
    tp = fn = tn = fp = 0
    for t, p in zip(y_true, y_pred):
        if t == positive:
            if p == positive:
                tp += 1
            else:
                fn += 1
        else:
            if p == positive:
                fp += 1
            else:
                tn += 1
    pos = tp + fn
    neg = tn + fp
    return RateReport(
        tp=tp,
        fn=fn,
        tn=tn,
        fp=fp,
        tpr=tp / pos if pos else None,
        fnr=fn / pos if pos else None,
        tnr=tn / neg if neg else None,
        fpr=fp / neg if neg else None,
        acc=(tp + tn) / (pos + neg),
    )


def adjusted_rand_index(a: Mapping, b: Mapping) -> float:
    """Chance-corrected pair-counting agreement between two partitions."""
    if set(a) != set(b):
        raise ValueError("partitions must cover the same node set")
    nodes = sorted(a)
    n = len(nodes)
    if n < 2:
        raise ValueError("need at least 2 nodes")
    table: dict[tuple, int] = {}
    row_sums: dict = {}
    col_sums: dict = {}
    for node in nodes:
        key = (a[node], b[node])
        table[key] = table.get(key, 0) + 1
        row_sums[a[node]] = row_sums.get(a[node], 0) + 1
        col_sums[b[node]] = col_sums.get(b[node], 0) + 1
    sum_cells = sum(comb(v, 2) for v in table.values())
    sum_rows = sum(comb(v, 2) for v in row_sums.values())
    sum_cols = sum(comb(v, 2) for v in col_sums.values())
    expected = sum_rows * sum_cols / comb(n, 2)
    max_index = (sum_rows + sum_cols) / 2
    if max_index == expected:
        # Both partitions are all-singletons or all-one-cluster; they agree.
        return 1.0
    return (sum_cells - expected) / (max_index - expected)


def stratified_folds(y: Sequence, folds: int, seed: int = 0) -> list[np.ndarray]:
    """Fold index arrays preserving the class ratio within one sample per fold."""
    if folds < 2:
        raise ValueError("need at least 2 folds")
    y_arr = np.asarray(y)
    rng = np.random.default_rng(seed)
    assignments: list[list[int]] = [[] for _ in range(folds)]
    for cls in sorted(set(y_arr.tolist())):
        members = np.nonzero(y_arr == cls)[0]
        members = members[rng.permutation(len(members))]
        for pos, idx in enumerate(members):
            assignments[pos % folds].append(int(idx))
    out = [np.array(sorted(fold), dtype=np.int64) for fold in assignments]
    for fold in out:
        if len(set(y_arr[fold].tolist())) < 2:
            raise ValueError("degenerate folds: a fold is missing a class")
    return out


@dataclass
class GridSearchResult:
    best_params: dict
    best_accuracy: float
    cells: list[tuple[dict, float]]


def kfold_grid_search(
    x: np.ndarray,
    y: Sequence,
    param_grid: Mapping[str, Sequence],
    fit_predict: Callable[[dict, np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    folds: int = 5,
    seed: int = 0,
) -> GridSearchResult:
    """Mean cross-validated accuracy per grid cell; first cell wins ties.

    ``fit_predict(params, x_train, y_train, x_test)`` must return predicted
    labels for ``x_test``.
    """
    x = np.asarray(x)
    y_arr = np.asarray(y)
    fold_indices = stratified_folds(y_arr, folds, seed)
    keys = list(param_grid)
    cells: list[tuple[dict, float]] = []
    best: tuple[dict, float] | None = None
    for values in itertools.product(*(param_grid[k] for k in keys)):
        params = dict(zip(keys, values))
        accuracies = []
        for fold in fold_indices:
            mask = np.ones(len(y_arr), dtype=bool)
            mask[fold] = False
            preds = fit_predict(params, x[mask], y_arr[mask], x[fold])
            accuracies.append(float(np.mean(np.asarray(preds) == y_arr[fold])))
        mean_acc = float(np.mean(accuracies))
        cells.append((params, mean_acc))
        if best is None or mean_acc > best[1]:
            best = (params, mean_acc)
    assert best is not None
    return GridSearchResult(best_params=best[0], best_accuracy=best[1], cells=cells)
