"""Independent reference implementations the tests check against."""

from __future__ import annotations

import numpy as np


def levenshtein_dp(a: str, b: str) -> int:
    """Full-matrix dynamic-programming edit distance."""
    n, m = len(a), len(b)
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        table[i][0] = i
    for j in range(m + 1):
        table[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            table[i][j] = min(
                table[i - 1][j] + 1,
                table[i][j - 1] + 1,
                table[i - 1][j - 1] + (a[i - 1] != b[j - 1]),
            )
    return table[n][m]


def all_partitions(items: list):
    """Every set partition of ``items`` (Bell-number many; keep inputs small)."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for smaller in all_partitions(rest):
        for i in range(len(smaller)):
            yield smaller[:i] + [[first] + smaller[i]] + smaller[i + 1 :]
        yield [[first]] + smaller


def best_modularity_partition(graph, modularity_fn):
    """Exhaustive modularity maximization; usable for up to ~7 nodes."""
    best_q, best_mapping = -np.inf, None
    for parts in all_partitions(list(graph.names)):
        mapping = {name: i for i, group in enumerate(parts) for name in group}
        q = modularity_fn(graph, mapping)
        if q > best_q:
            best_q, best_mapping = q, mapping
    return best_q, best_mapping


def alignment_finite_difference(weights, features, target, alignment_fn, h=1e-5):
    """Central finite differences of the alignment objective."""
    out = np.zeros(len(weights))
    for k in range(len(weights)):
        plus = np.array(weights, dtype=float)
        minus = plus.copy()
        plus[k] += h
        minus[k] -= h
        a_plus = alignment_fn(np.exp(-(features @ plus)), target)
        a_minus = alignment_fn(np.exp(-(features @ minus)), target)
        out[k] = (a_plus - a_minus) / (2 * h)
    return out
