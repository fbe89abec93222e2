"""Decision forest over binary feature vectors.

Trees split on single bits, greedily maximizing impurity decrease over a
random feature subset per node. Prediction averages the malicious-class
frequency of the reached leaves; an exact 0.5 score counts as malicious,
since missing malware is the costlier mistake.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = ["ForestError", "ForestConfig", "Tree", "Forest", "impurity", "train_forest", "predict"]

MALICIOUS = 1
LEGITIMATE = 0


class ForestError(ValueError):
    pass


@dataclass
class ForestConfig:
    trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    criterion: str = "gini"
    features_per_split: int | None = None  # defaults to ceil(sqrt(n_features))
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.trees < 1:
            raise ValueError("need at least one tree")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.criterion not in ("gini", "entropy"):
            raise ValueError(f"unknown criterion {self.criterion!r}")


def impurity(counts: Sequence[float], criterion: str = "gini") -> float:
    """Gini or entropy impurity of a class-count vector."""
    arr = np.asarray(counts, dtype=np.float64)
    total = arr.sum()
    if total <= 0:
        raise ValueError("counts must sum to at least 1")
    p = arr / total
    if criterion == "gini":
        return float(1.0 - np.sum(p * p))
    if criterion == "entropy":
        nz = p[p > 0]
        return float(-np.sum(nz * np.log2(nz)))
    raise ValueError(f"unknown criterion {criterion!r}")


def _impurity_from_counts(c0: float, c1: float, criterion: str) -> float:
    total = c0 + c1
    if total == 0:
        return 0.0
    if criterion == "gini":
        p1 = c1 / total
        return 2.0 * p1 * (1.0 - p1)
    out = 0.0
    for c in (c0, c1):
        if c > 0:
            p = c / total
            out -= p * math.log2(p)
    return out


@dataclass
class Tree:
    """Flat node arrays; feature == -1 marks a leaf."""

    feature: list[int] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    counts: list[list[int]] = field(default_factory=list)

    def add_node(self, c0: int, c1: int) -> int:
        self.feature.append(-1)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append([int(c0), int(c1)])
        return len(self.feature) - 1

    def leaf_scores(self, x_row: np.ndarray) -> tuple[int, int]:
        node = 0
        while self.feature[node] >= 0:
            node = self.right[node] if x_row[self.feature[node]] else self.left[node]
        c0, c1 = self.counts[node]
        return c0, c1

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "left": self.left,
            "right": self.right,
            "counts": self.counts,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Tree":
        return cls(
            feature=[int(v) for v in payload["feature"]],
            left=[int(v) for v in payload["left"]],
            right=[int(v) for v in payload["right"]],
            counts=[[int(a), int(b)] for a, b in payload["counts"]],
        )


@dataclass
class Forest:
    trees: list[Tree]
    n_features: int
    config: ForestConfig

    def to_dict(self) -> dict:
        return {
            "n_features": self.n_features,
            "config": {
                "trees": self.config.trees,
                "max_depth": self.config.max_depth,
                "min_samples_split": self.config.min_samples_split,
                "criterion": self.config.criterion,
                "features_per_split": self.config.features_per_split,
                "bootstrap": self.config.bootstrap,
                "seed": self.config.seed,
            },
            "trees_data": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Forest":
        cfg = ForestConfig(**payload["config"])
        n_features = int(payload["n_features"])
        trees = [Tree.from_dict(t) for t in payload["trees_data"]]
        for tree in trees:
            n_nodes = len(tree.feature)
            for node, feature in enumerate(tree.feature):
                if feature >= 0:
                    valid = (
                        0 <= feature < n_features
                        and 0 <= tree.left[node] < n_nodes
                        and 0 <= tree.right[node] < n_nodes
                    )
                    if not valid:
                        raise ValueError("corrupted tree: node references out of range")
                elif tree.counts[node][0] + tree.counts[node][1] <= 0:
                    raise ValueError("corrupted tree: leaf without class counts")
        return cls(trees=trees, n_features=n_features, config=cfg)


def _grow_tree(x: np.ndarray, y: np.ndarray, cfg: ForestConfig, mtry: int, rng) -> Tree:
    tree = Tree()
    d = x.shape[1]
    # (node position, row indices, depth) work stack; DFS keeps numbering stable.
    root = tree.add_node(*np.bincount(y, minlength=2))
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = np.bincount(y[idx], minlength=2)
        c0, c1 = int(counts[0]), int(counts[1])
        tree.counts[node] = [c0, c1]
        n = c0 + c1
        if (
            c0 == 0
            or c1 == 0
            or n < cfg.min_samples_split
            or (cfg.max_depth is not None and depth >= cfg.max_depth)
        ):
            continue
        node_imp = _impurity_from_counts(c0, c1, cfg.criterion)
        candidates = np.sort(rng.choice(d, size=min(mtry, d), replace=False))
        xs = x[idx]
        best_gain = 1e-12
        best_feature = -1
        for f in candidates:
            col = xs[:, f]
            n_right = int(col.sum())
            if n_right == 0 or n_right == n:
                continue
            r1 = int(y[idx[col == 1]].sum())
            l1 = c1 - r1
            n_left = n - n_right
            child_imp = (
                n_left * _impurity_from_counts(n_left - l1, l1, cfg.criterion)
                + n_right * _impurity_from_counts(n_right - r1, r1, cfg.criterion)
            ) / n
            gain = node_imp - child_imp
            if gain > best_gain:
                best_gain = gain
                best_feature = int(f)
        if best_feature < 0:
            continue
        col = xs[:, best_feature]
        left_idx = idx[col == 0]
        right_idx = idx[col == 1]
        tree.feature[node] = best_feature
        left = tree.add_node(0, 0)
        right = tree.add_node(0, 0)
        tree.left[node] = left
        tree.right[node] = right
        stack.append((right, right_idx, depth + 1))
        stack.append((left, left_idx, depth + 1))
    return tree


def train_forest(x: np.ndarray, y: np.ndarray, cfg: ForestConfig | None = None) -> Forest:
    """Fit the forest; every tree gets its own bootstrap resample and seed stream."""
    cfg = cfg or ForestConfig()
    x = np.asarray(x, dtype=np.uint8)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or len(x) != len(y):
        raise ForestError("x must be a 2-d matrix aligned with y")
    if len(y) < 2:
        raise ForestError("need at least 2 training samples")
    classes = set(np.unique(y).tolist())
    if not classes <= {0, 1}:
        raise ForestError("labels must be 0 (legitimate) or 1 (malicious)")
    if len(classes) < 2:
        raise ForestError("training data must contain both classes")
    d = x.shape[1]
    mtry = cfg.features_per_split or max(1, math.ceil(math.sqrt(d)))
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.trees)
    trees = []
    n = len(y)
    for t in range(cfg.trees):
        rng = np.random.default_rng(seeds[t])
        if cfg.bootstrap:
            sample = rng.integers(0, n, size=n)
            xt, yt = x[sample], y[sample]
        else:
            xt, yt = x, y
        trees.append(_grow_tree(xt, yt, cfg, mtry, rng))
    return Forest(trees=trees, n_features=d, config=cfg)


def predict(forest: Forest, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Labels and mean leaf malicious-frequency scores; score >= 0.5 is malicious."""
    x = np.asarray(x, dtype=np.uint8)
    if x.ndim != 2 or x.shape[1] != forest.n_features:
        raise ForestError(
            f"expected {forest.n_features} features, got shape {tuple(x.shape)}"
        )
    scores = np.zeros(len(x))
    for row_i in range(len(x)):
        row = x[row_i]
        fractions = []
        for tree in forest.trees:
            c0, c1 = tree.leaf_scores(row)
            total = c0 + c1
            fractions.append((c1 / total) if total else 0.5)
        # fsum keeps the score independent of tree order
        scores[row_i] = math.fsum(fractions) / len(forest.trees)
    labels = (scores >= 0.5).astype(np.int64)
    return labels, scores
