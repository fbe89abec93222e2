"""Learn path-similarity weights by centered kernel target alignment.

Given paths labeled with behavior classes, the 9 difference-vector weights
are chosen to maximize the correlation between the resulting similarity
matrix and the label kernel. The objective is ascended with mini-batch
projected stochastic gradient steps; weights stay non-negative.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .similarity import PathTokenizer, diff_features

__all__ = [
    "AlignmentError",
    "LabeledPaths",
    "OptimizerConfig",
    "OptimizeResult",
    "frobenius_product",
    "frobenius_norm",
    "center_kernel",
    "target_kernel",
    "alignment",
    "pair_feature_tensor",
    "alignment_gradient",
    "optimize_weights",
]

# Full pairwise feature tensors are precomputed up to this many paths;
# larger corpora fall back to per-batch computation with a pair cache.
_EAGER_TENSOR_LIMIT = 1200


class AlignmentError(ValueError):
    """Raised when the alignment objective is degenerate (zero centered norm)."""


def frobenius_product(a, b) -> float:
    """Elementwise matrix inner product."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sum(a * b))


def frobenius_norm(a) -> float:
    return math.sqrt(frobenius_product(a, a))


def center_kernel(s) -> np.ndarray:
    """Subtract row means and column means, add back the grand mean."""
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {s.shape}")
    row = s.mean(axis=1, keepdims=True)
    col = s.mean(axis=0, keepdims=True)
    return s - row - col + s.mean()


def target_kernel(labels: Sequence) -> np.ndarray:
    """+1 where two items share a class, -1 otherwise."""
    arr = np.asarray(labels)
    if arr.shape[0] < 2:
        raise ValueError("need at least 2 labels")
    return np.where(arr[:, None] == arr[None, :], 1.0, -1.0)


def alignment(s, y) -> float:
    """Cosine of the angle between the centered similarity and label kernels."""
    sc = center_kernel(s)
    yc = center_kernel(y)
    if sc.shape != yc.shape:
        raise ValueError(f"shape mismatch: {sc.shape} vs {yc.shape}")
    ns = np.linalg.norm(sc)
    ny = np.linalg.norm(yc)
    if ns <= 0 or ny <= 0:
        raise AlignmentError("centered kernel has zero norm")
    return float(np.sum(sc * yc) / (ns * ny))


@dataclass(frozen=True)
class LabeledPaths:
    """Paths with integer behavior-class ids, the optimizer's training data."""

    paths: tuple[str, ...]
    classes: tuple[int, ...]

    def __post_init__(self):
        if len(self.paths) != len(self.classes):
            raise ValueError("paths and classes must have equal length")
        if len(self.paths) < 2:
            raise ValueError("need at least 2 labeled paths")
        if len(set(self.classes)) < 2:
            raise ValueError("need at least 2 distinct classes")

    def __len__(self) -> int:
        return len(self.paths)

    @classmethod
    def from_jsonl(cls, path) -> "LabeledPaths":
        paths, classes = [], []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                paths.append(str(record["path"]))
                classes.append(int(record["class"]))
        return cls(tuple(paths), tuple(classes))


@dataclass
class OptimizerConfig:
    batch_size: int = 64
    epochs: int = 50
    learning_rate: float = 0.1
    initial_weights: tuple[float, ...] = (1.0,) * 9
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 4:
            raise ValueError("batch_size must be >= 4")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


def pair_feature_tensor(
    paths: Sequence[str], known, lowercase: bool = True
) -> np.ndarray:
    """(m, m, 9) tensor of pairwise difference vectors; symmetric, zero diagonal."""
    tok = PathTokenizer(known, lowercase)
    fragments = [tok.tokenize(p) for p in paths]
    m = len(fragments)
    out = np.zeros((m, m, 9))
    for i in range(m):
        for j in range(i + 1, m):
            f = diff_features(fragments[i], fragments[j])
            out[i, j] = f
            out[j, i] = f
    return out


def _gradient_from_parts(w: np.ndarray, features: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of the alignment objective at ``w`` for one pair tensor."""
    s = np.exp(-(features @ w))
    sc = center_kernel(s)
    yc = center_kernel(y)
    ns = np.linalg.norm(sc)
    ny = np.linalg.norm(yc)
    if ns <= 0 or ny <= 0:
        raise AlignmentError("degenerate batch: centered kernel has zero norm")
    ip = float(np.sum(sc * yc))
    d_align_ds = yc / (ns * ny) - (ip / (ns**3 * ny)) * sc
    return -np.einsum("ij,ijk->k", d_align_ds * s, features)


def alignment_gradient(
    weights, batch: LabeledPaths, known, lowercase: bool = True
) -> np.ndarray:
    """Analytic gradient of the batch-restricted alignment at ``weights``."""
    w = np.asarray(weights, dtype=np.float64)
    features = pair_feature_tensor(batch.paths, known, lowercase)
    y = target_kernel(batch.classes)
    return _gradient_from_parts(w, features, y)


@dataclass
class OptimizeResult:
    weights: np.ndarray
    alignment_before: float
    alignment_after: float
    epoch_alignments: list[float] = field(default_factory=list)
    skipped_batches: int = 0


class _PairFeatures:
    """Pairwise feature lookup, eager for small corpora and cached for large ones."""

    def __init__(self, paths: Sequence[str], known, lowercase: bool):
        tok = PathTokenizer(known, lowercase)
        self.fragments = [tok.tokenize(p) for p in paths]
        self.m = len(self.fragments)
        self.eager = self.m <= _EAGER_TENSOR_LIMIT
        if self.eager:
            self.tensor = pair_feature_tensor(paths, known, lowercase)
        else:
            self.tensor = None
            self._cache: dict[tuple[int, int], np.ndarray] = {}

    def batch_tensor(self, idx: np.ndarray) -> np.ndarray:
        if self.eager:
            return self.tensor[np.ix_(idx, idx)]
        b = len(idx)
        out = np.zeros((b, b, 9))
        for a in range(b):
            for c in range(a + 1, b):
                i, j = int(idx[a]), int(idx[c])
                if i == j:
                    continue
                key = (i, j) if i < j else (j, i)
                f = self._cache.get(key)
                if f is None:
                    f = diff_features(self.fragments[i], self.fragments[j])
                    if len(self._cache) > 2_000_000:
                        self._cache.clear()
                    self._cache[key] = f
                out[a, c] = f
                out[c, a] = f
        return out

    def full_alignment(self, w: np.ndarray, y: np.ndarray) -> float:
        if self.eager:
            s = np.exp(-(self.tensor @ w))
        else:
            s = np.ones((self.m, self.m))
            for i in range(self.m):
                for j in range(i + 1, self.m):
                    f = diff_features(self.fragments[i], self.fragments[j])
                    s[i, j] = s[j, i] = math.exp(-float(f @ w))
        return alignment(s, y)


def optimize_weights(
    data: LabeledPaths, cfg: OptimizerConfig, known, lowercase: bool = True
) -> OptimizeResult:
    """Projected stochastic gradient ascent on the alignment objective.

    Mini-batches of paths are sampled uniformly with replacement; after
    each ascent step the weights are clipped to the non-negative orthant.
    The returned weights are the best-scoring ones seen on the full data,
    so the result never aligns worse than the initial weights.
    """
    w = np.asarray(cfg.initial_weights, dtype=np.float64).copy()
    if w.shape != (9,):
        raise ValueError("initial_weights must have 9 elements")
    if (w < 0).any():
        raise ValueError("initial_weights must be non-negative")
    features = _PairFeatures(data.paths, known, lowercase)
    y_full = target_kernel(data.classes)
    labels = np.asarray(data.classes)

    best_alignment = features.full_alignment(w, y_full)
    initial_alignment = best_alignment
    best_w = w.copy()
    result = OptimizeResult(
        weights=best_w, alignment_before=initial_alignment, alignment_after=initial_alignment
    )
    if cfg.epochs == 0:
        return result

    rng = np.random.default_rng(cfg.seed)
    m = len(data)
    batch = min(cfg.batch_size, m)
    steps_per_epoch = max(1, math.ceil(m / batch))
    evaluate_each_epoch = features.eager
    t = 0
    for _ in range(cfg.epochs):
        for _ in range(steps_per_epoch):
            idx = rng.choice(m, size=batch, replace=True)
            t += 1
            if len(set(labels[idx].tolist())) < 2:
                result.skipped_batches += 1
                continue
            try:
                grad = _gradient_from_parts(w, features.batch_tensor(idx), target_kernel(labels[idx]))
            except AlignmentError:
                result.skipped_batches += 1
                continue
            w = np.maximum(w + (cfg.learning_rate / math.sqrt(t)) * grad, 0.0)
        if evaluate_each_epoch:
            score = features.full_alignment(w, y_full)
            result.epoch_alignments.append(score)
            if score > best_alignment:
                best_alignment = score
                best_w = w.copy()
    if not evaluate_each_epoch:
        score = features.full_alignment(w, y_full)
        result.epoch_alignments.append(score)
        if score > best_alignment:
            best_alignment = score
            best_w = w.copy()

    result.weights = best_w
    result.alignment_after = best_alignment
    return result
