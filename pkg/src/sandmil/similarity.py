"""Type-specific similarity functions over resource names.

File paths and registry keys are compared with a tree-aware similarity:
both names are split into fragments, every fragment is classified as a
known folder, a general folder, or the terminal file, and the per-level
differences are condensed into a 9-element vector whose weighted sum
feeds ``exp(-w.f)``. Mutex names and network hostnames fall back to a
normalized edit distance on the whole string.
"""

from __future__ import annotations

import functools
import math
import re
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "FragmentCategory",
    "FragmentedPath",
    "PathTokenizer",
    "PathSimilarity",
    "EditSimilarity",
    "SimilarityConfig",
    "levenshtein",
    "normalized_levenshtein",
    "tokenize_and_classify",
    "diff_features",
    "path_similarity",
    "similarity_for_type",
    "DIFF_LABELS",
    "DEFAULT_FILE_KNOWN_FOLDERS",
    "DEFAULT_REGISTRY_KNOWN_FOLDERS",
    "DEFAULT_FILE_WEIGHTS",
    "DEFAULT_REGISTRY_WEIGHTS",
]


class FragmentCategory(IntEnum):
    """Role of one path fragment: known folder, general folder, file, or padding."""

    KNOWN = 0
    GENERAL = 1
    FILE = 2
    EMPTY = 3


_K = FragmentCategory.KNOWN
_G = FragmentCategory.GENERAL
_F = FragmentCategory.FILE
_E = FragmentCategory.EMPTY

# Slots of the difference vector, in canonical order.
DIFF_LABELS = ("kk", "kg", "kf", "ke", "gg", "gf", "ge", "ff", "fe")

_SLOT_KK = 0
_SLOT_GG = 4
_SLOT_FF = 7

# Mixed category pairs are unordered; each occurrence counts 1.
_MIXED_SLOT = {
    (_K, _G): 1,
    (_K, _F): 2,
    (_K, _E): 3,
    (_G, _F): 5,
    (_G, _E): 6,
    (_F, _E): 8,
}

_SEPARATORS = re.compile(r"[\\/]+")

# Editable defaults; real deployments extend these via the config file.
DEFAULT_FILE_KNOWN_FOLDERS = frozenset(
    {
        "documents and settings",
        "start menu",
        "programs",
        "startup",
        "windows",
        "system32",
        "program files",
        "temp",
    }
)

DEFAULT_REGISTRY_KNOWN_FOLDERS = frozenset(
    {
        "hkey_local_machine",
        "hkey_current_user",
        "hkey_current_config",
        "hkey_classes_root",
        "hkey_users",
        "hkey_performance_data",
        "software",
        "microsoft",
        "windows",
    }
)

# Default weights, canonical slot order (kk, kg, kf, ke, gg, gf, ge, ff, fe).
# Mismatched known folders weigh heavily; differences between randomly
# generated general folders weigh almost nothing, so randomized directory
# names do not break up otherwise identical paths.
DEFAULT_FILE_WEIGHTS = (2.0, 1.0, 1.0, 0.5, 0.1, 1.0, 0.25, 1.6, 0.8)
DEFAULT_REGISTRY_WEIGHTS = DEFAULT_FILE_WEIGHTS


# ---------------------------------------------------------------------------
# Edit distance
# ---------------------------------------------------------------------------


def levenshtein(a: str, b: str) -> int:
    """Minimum number of single-character inserts, deletes, and substitutions.

    Bit-parallel algorithm; arbitrary lengths are supported through Python
    integers, so cost grows with ``len(a)/64 * len(b)`` rather than
    ``len(a) * len(b)``.
    """
    if a == b:
        return 0
    m = len(a)
    if m == 0:
        return len(b)
    if len(b) == 0:
        return m
    peq: dict[str, int] = {}
    for i, ch in enumerate(a):
        peq[ch] = peq.get(ch, 0) | (1 << i)
    score = m
    last = 1 << (m - 1)
    mask = (1 << m) - 1
    pv = mask
    mv = 0
    for ch in b:
        eq = peq.get(ch, 0)
        xv = eq | mv
        xh = (((eq & pv) + pv) ^ pv) | eq
        ph = mv | (~(xh | pv) & mask)
        mh = pv & xh
        if ph & last:
            score += 1
        elif mh & last:
            score -= 1
        ph = ((ph << 1) | 1) & mask
        mh = (mh << 1) & mask
        pv = mh | (~(xv | ph) & mask)
        mv = ph & xv
    return score


@functools.lru_cache(maxsize=1 << 18)
def _normalized_levenshtein_cached(a: str, b: str) -> float:
    longer = max(len(a), len(b))
    if longer == 0:
        return 0.0
    return levenshtein(a, b) / longer


def normalized_levenshtein(a: str, b: str) -> float:
    """Edit distance divided by the longer string's length; 0 for two empty strings."""
    if a > b:
        a, b = b, a
    return _normalized_levenshtein_cached(a, b)


def _levenshtein_row(query: str, names: Sequence[str], enc: "_EncodedStrings") -> np.ndarray:
    """Edit distance from ``query`` to every string in ``names`` at once.

    Vectorizes the bit-parallel recurrence across all texts when the query
    fits in 64 bits; otherwise falls back to the scalar routine.
    """
    n = len(names)
    m = len(query)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    if m == 0:
        return enc.lens.copy()
    if m > 64:
        return np.array([levenshtein(query, t) for t in names], dtype=np.int64)
    peq = np.zeros(enc.alphabet_size + 1, dtype=np.uint64)
    for i, ch in enumerate(query):
        code = enc.char_codes.get(ch)
        if code is not None:
            peq[code] |= np.uint64(1 << i)
    mask = np.uint64((1 << m) - 1)
    last = np.uint64(1 << (m - 1))
    one = np.uint64(1)
    score = np.full(n, m, dtype=np.int64)
    pv = np.full(n, mask, dtype=np.uint64)
    mv = np.zeros(n, dtype=np.uint64)
    for p in range(enc.max_len):
        active = enc.lens > p
        eq = peq[enc.codes[:, p]]
        xv = eq | mv
        xh = (((eq & pv) + pv) ^ pv) | eq
        ph = mv | (~(xh | pv) & mask)
        mh = pv & xh
        score += ((ph & last) != 0) & active
        score -= ((mh & last) != 0) & active
        ph = ((ph << one) | one) & mask
        mh = (mh << one) & mask
        npv = mh | (~(xv | ph) & mask)
        nmv = ph & xv
        pv = np.where(active, npv, pv)
        mv = np.where(active, nmv, mv)
    return score


class _EncodedStrings:
    """Column-major character codes for a fixed list of strings."""

    def __init__(self, names: Sequence[str]):
        self.names = list(names)
        n = len(self.names)
        self.lens = np.array([len(s) for s in self.names], dtype=np.int64)
        self.max_len = int(self.lens.max()) if n else 0
        chars = sorted({ch for s in self.names for ch in s})
        self.char_codes = {ch: i for i, ch in enumerate(chars)}
        self.alphabet_size = len(chars)
        # Padding positions map to the extra (all-zero) alphabet slot.
        self.codes = np.full((n, self.max_len), self.alphabet_size, dtype=np.int32)
        for i, s in enumerate(self.names):
            if s:
                self.codes[i, : len(s)] = [self.char_codes[c] for c in s]


# ---------------------------------------------------------------------------
# Path tokenization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FragmentedPath:
    """A path split into fragments, each tagged with its category."""

    texts: tuple[str, ...]
    categories: tuple[FragmentCategory, ...]
    original: str

    @property
    def fragments(self) -> tuple[tuple[str, FragmentCategory], ...]:
        return tuple(zip(self.texts, self.categories))

    @property
    def depth(self) -> int:
        return len(self.texts)


def tokenize_and_classify(
    path: str, known: frozenset[str] | set[str], lowercase: bool = True
) -> FragmentedPath:
    """Split ``path`` on separators and classify every fragment.

    The terminal fragment is always the file; the rest are known folders
    when they appear in ``known`` (matched on lowercased text) and general
    folders otherwise. Empty fragments from doubled separators are dropped.
    """
    parts = [p for p in _SEPARATORS.split(path) if p]
    if not parts:
        raise ValueError(f"path has no fragments: {path!r}")
    if lowercase:
        parts = [p.lower() for p in parts]
    cats = tuple(
        _F if i == len(parts) - 1 else (_K if p.lower() in known else _G)
        for i, p in enumerate(parts)
    )
    return FragmentedPath(texts=tuple(parts), categories=cats, original=path)


class PathTokenizer:
    """Tokenizer with a per-instance cache of fragmented paths."""

    def __init__(self, known: Iterable[str], lowercase: bool = True):
        self.known = frozenset(f.lower() for f in known)
        self.lowercase = lowercase
        self._cache: dict[str, FragmentedPath] = {}

    def tokenize(self, path: str) -> FragmentedPath:
        hit = self._cache.get(path)
        if hit is None:
            hit = tokenize_and_classify(path, self.known, self.lowercase)
            self._cache[path] = hit
        return hit


# ---------------------------------------------------------------------------
# Difference vector and similarity
# ---------------------------------------------------------------------------


def diff_features(x: FragmentedPath, y: FragmentedPath) -> np.ndarray:
    """9-element fragment-difference vector between two tokenized paths.

    The shorter path is padded with empty fragments at its deep end. Per
    level: unequal known folders count 1 into the kk slot, general/general
    and file/file pairs add their normalized edit distance, and every mixed
    pair counts 1 into its slot.
    """
    out = np.zeros(9)
    xt, xc = x.texts, x.categories
    yt, yc = y.texts, y.categories
    nx, ny = len(xt), len(yt)
    for i in range(max(nx, ny)):
        ca = xc[i] if i < nx else _E
        cb = yc[i] if i < ny else _E
        if ca == cb:
            ta = xt[i]
            tb = yt[i]
            if ca == _K:
                if ta != tb:
                    out[_SLOT_KK] += 1.0
            elif ca == _G:
                out[_SLOT_GG] += normalized_levenshtein(ta, tb)
            else:
                out[_SLOT_FF] += normalized_levenshtein(ta, tb)
        else:
            if ca > cb:
                ca, cb = cb, ca
            out[_MIXED_SLOT[(ca, cb)]] += 1.0
    return out


def path_similarity(x: FragmentedPath, y: FragmentedPath, weights) -> float:
    """``exp(-w.f(x, y))``: 1 for identical paths, approaching 0 as they diverge."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (9,):
        raise ValueError(f"expected 9 weights, got shape {w.shape}")
    if (w < 0).any():
        raise ValueError("weights must be non-negative")
    return float(math.exp(-float(w @ diff_features(x, y))))


class _EncodedPaths:
    """Per-level fragment ids and categories for a fixed list of paths.

    Shared by the bulk similarity kernels so the per-name Python work is
    paid once per list instead of once per pair.
    """

    def __init__(self, tokens: Sequence[FragmentedPath]):
        self.tokens = list(tokens)
        n = len(self.tokens)
        self.max_depth = max((t.depth for t in self.tokens), default=0)
        self.frag_ids: dict[str, int] = {}
        self.strings: list[str] = []
        self.cats = np.full((n, self.max_depth), int(_E), dtype=np.int8)
        self.ids = np.full((n, self.max_depth), -1, dtype=np.int32)
        for i, tok in enumerate(self.tokens):
            for lvl, (text, cat) in enumerate(zip(tok.texts, tok.categories)):
                fid = self.frag_ids.get(text)
                if fid is None:
                    fid = len(self.strings)
                    self.frag_ids[text] = fid
                    self.strings.append(text)
                self.cats[i, lvl] = int(cat)
                self.ids[i, lvl] = fid
        self.str_lens = np.array([len(s) for s in self.strings], dtype=np.int64)
        self.frag_enc = _EncodedStrings(self.strings)

    def __len__(self) -> int:
        return len(self.tokens)

    def slice(self, start: int) -> "_EncodedPaths":
        out = object.__new__(_EncodedPaths)
        out.tokens = self.tokens[start:]
        out.max_depth = self.max_depth
        out.frag_ids = self.frag_ids
        out.strings = self.strings
        out.cats = self.cats[start:]
        out.ids = self.ids[start:]
        out.str_lens = self.str_lens
        out.frag_enc = self.frag_enc
        return out


class PathSimilarity:
    """Tree-aware similarity over file paths or registry keys."""

    def __init__(self, known: Iterable[str], weights=DEFAULT_FILE_WEIGHTS, lowercase: bool = True):
        self.weights = np.asarray(weights, dtype=np.float64)
        if self.weights.shape != (9,):
            raise ValueError("expected 9 weights")
        if (self.weights < 0).any():
            raise ValueError("weights must be non-negative")
        self.tokenizer = PathTokenizer(known, lowercase)

    def __call__(self, a: str, b: str) -> float:
        return path_similarity(self.tokenizer.tokenize(a), self.tokenizer.tokenize(b), self.weights)

    def encode(self, names: Sequence[str]) -> _EncodedPaths:
        return _EncodedPaths([self.tokenizer.tokenize(n) for n in names])

    def against(self, query: str, enc) -> np.ndarray:
        """Similarity from ``query`` to every encoded name, vectorized per level."""
        if not isinstance(enc, _EncodedPaths):
            enc = self.encode(list(enc))
        n = len(enc)
        if n == 0:
            return np.zeros(0)
        q = self.tokenizer.tokenize(query)
        w = self.weights
        total = np.zeros(n)
        cost_vs = np.empty(4)
        for lvl in range(max(enc.max_depth, q.depth)):
            if lvl < enc.max_depth:
                cats = enc.cats[:, lvl]
            else:
                cats = np.full(n, int(_E), dtype=np.int8)
            qcat = q.categories[lvl] if lvl < q.depth else _E
            qfrag = q.texts[lvl] if lvl < q.depth else ""
            if qcat == _E:
                # Query exhausted: every remaining fragment pairs with padding.
                cost_vs[:] = (w[3], w[6], w[8], 0.0)
                total += cost_vs[cats]
                continue
            if qcat == _K:
                cost_vs[:] = (0.0, w[1], w[2], w[3])
                total += cost_vs[cats]
                if lvl < enc.max_depth:
                    qid = enc.frag_ids.get(qfrag, -1)
                    mismatch = (cats == int(_K)) & (enc.ids[:, lvl] != qid)
                    total += np.where(mismatch, w[0], 0.0)
            else:
                if qcat == _G:
                    cost_vs[:] = (w[1], 0.0, w[5], w[6])
                    slot_w = w[4]
                else:
                    cost_vs[:] = (w[2], w[5], 0.0, w[8])
                    slot_w = w[7]
                total += cost_vs[cats]
                same = cats == int(qcat)
                if slot_w != 0.0 and same.any():
                    ids = enc.ids[same, lvl]
                    uids = np.unique(ids)
                    if len(uids) > 48:
                        # Many distinct fragments: one vectorized pass over all
                        # interned strings beats per-fragment scalar calls.
                        dists = _levenshtein_row(qfrag, enc.strings, enc.frag_enc)[uids]
                    else:
                        dists = np.array(
                            [levenshtein(qfrag, enc.strings[u]) for u in uids], dtype=np.float64
                        )
                    longer = np.maximum(len(qfrag), enc.str_lens[uids])
                    nlev = np.where(longer > 0, dists / np.maximum(longer, 1), 0.0)
                    total[same] += slot_w * nlev[np.searchsorted(uids, ids)]
        return np.exp(-total)


class EditSimilarity:
    """1 minus normalized edit distance on whole names (mutexes, hostnames)."""

    def __init__(self, lowercase: bool = False):
        self.lowercase = lowercase

    def _norm(self, name: str) -> str:
        return name.lower() if self.lowercase else name

    def __call__(self, a: str, b: str) -> float:
        return 1.0 - normalized_levenshtein(self._norm(a), self._norm(b))

    def encode(self, names: Sequence[str]) -> _EncodedStrings:
        return _EncodedStrings([self._norm(n) for n in names])

    def against(self, query: str, enc) -> np.ndarray:
        if not isinstance(enc, _EncodedStrings):
            enc = self.encode(list(enc))
        if len(enc.names) == 0:
            return np.zeros(0)
        query = self._norm(query)
        dists = _levenshtein_row(query, enc.names, enc)
        longer = np.maximum(len(query), enc.lens)
        nlev = np.where(longer > 0, dists / np.maximum(longer, 1), 0.0)
        return 1.0 - nlev


# ---------------------------------------------------------------------------
# Configuration and dispatch
# ---------------------------------------------------------------------------


@dataclass
class SimilarityConfig:
    """Known-folder lists and per-type weight vectors."""

    file_known_folders: frozenset[str] = DEFAULT_FILE_KNOWN_FOLDERS
    registry_known_folders: frozenset[str] = DEFAULT_REGISTRY_KNOWN_FOLDERS
    file_weights: tuple[float, ...] = DEFAULT_FILE_WEIGHTS
    registry_weights: tuple[float, ...] = DEFAULT_REGISTRY_WEIGHTS
    lowercase: bool = True


def similarity_for_type(rtype: str, config: SimilarityConfig | None = None):
    """Similarity object for one resource type.

    Files and registry keys get the tree-aware path similarity with their
    own known-folder list and weights; mutexes get raw edit similarity;
    network hostnames get case-folded edit similarity as a stand-in for a
    dedicated traffic model.
    """
    cfg = config or SimilarityConfig()
    rtype = str(rtype)
    if rtype == "file":
        return PathSimilarity(cfg.file_known_folders, cfg.file_weights, cfg.lowercase)
    if rtype == "registry":
        return PathSimilarity(cfg.registry_known_folders, cfg.registry_weights, cfg.lowercase)
    if rtype == "mutex":
        return EditSimilarity(lowercase=False)
    if rtype == "network":
        return EditSimilarity(lowercase=True)
    raise ValueError(f"unknown resource type: {rtype!r}")
