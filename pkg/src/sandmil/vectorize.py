"""Project samples onto the cluster vocabulary as binary feature vectors.

The vocabulary is the ordered union of all cluster prototypes across
resource types plus one feature per sandbox warning. A sample's vector
has a 1 wherever some instance maps to that prototype, or the warning was
raised.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .clustering import ClusterPrototype, PrototypeIndex
from .ingest import ResourceType, SandboxSample, SandboxWarning

__all__ = [
    "Vocabulary",
    "Projector",
    "build_vocabulary",
    "project_sample",
    "project_corpus",
    "write_projection",
    "read_projection",
]

RTYPE_ORDER = (
    ResourceType.FILE,
    ResourceType.REGISTRY,
    ResourceType.MUTEX,
    ResourceType.NETWORK,
)

WARNING_ORDER = (
    SandboxWarning.DLL_NOT_FOUND,
    SandboxWarning.INCORRECT_CHECKSUM,
    SandboxWarning.DID_NOT_EXECUTE,
)


@dataclass
class Vocabulary:
    """Ordered binary feature space: (rtype, prototype) features, then warnings."""

    features: tuple[tuple[str, ...], ...]
    prototypes_by_type: dict[ResourceType, list[ClusterPrototype]]
    index: dict[tuple[str, ...], int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {feat: i for i, feat in enumerate(self.features)}

    def __len__(self) -> int:
        return len(self.features)

    def position(self, feature: tuple[str, ...]) -> int:
        return self.index[feature]

    def to_dict(self) -> dict:
        return {
            "feature_order": [list(f) for f in self.features],
            "types": [
                {
                    "rtype": rtype.value,
                    "prototypes": [
                        {"id": p.prototype_id, "members": list(p.members)}
                        for p in protos
                    ],
                }
                for rtype, protos in sorted(
                    self.prototypes_by_type.items(), key=lambda kv: kv[0].value
                )
            ],
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "Vocabulary":
        by_type: dict[ResourceType, list[ClusterPrototype]] = {}
        for entry in payload["types"]:
            rtype = ResourceType(entry["rtype"])
            by_type[rtype] = [
                ClusterPrototype(
                    prototype_id=int(p["id"]), rtype=rtype.value, members=tuple(p["members"])
                )
                for p in entry["prototypes"]
            ]
        features = tuple(tuple(f) for f in payload["feature_order"])
        return cls(features=features, prototypes_by_type=by_type)


def build_vocabulary(
    prototypes_by_type: Mapping[ResourceType, Sequence[ClusterPrototype]]
) -> Vocabulary:
    """Deterministic feature ordering: by resource type, then prototype id; warnings last."""
    cleaned = {
        rtype: sorted(protos, key=lambda p: p.prototype_id)
        for rtype, protos in prototypes_by_type.items()
        if protos
    }
    if not cleaned:
        raise ValueError("vocabulary needs at least one prototype")
    features: list[tuple[str, ...]] = []
    for rtype in RTYPE_ORDER:
        for proto in cleaned.get(rtype, []):
            features.append(("proto", rtype.value, str(proto.prototype_id)))
    for warning in WARNING_ORDER:
        features.append(("warning", warning.value))
    return Vocabulary(features=tuple(features), prototypes_by_type=cleaned)


class Projector:
    """Projects samples into the vocabulary space, caching per-name lookups."""

    def __init__(
        self,
        vocabulary: Vocabulary,
        sims: Mapping[ResourceType, object],
        threshold: float | None = None,
    ):
        self.vocabulary = vocabulary
        self.threshold = threshold
        self.skipped_instances = 0
        self._indexes: dict[ResourceType, PrototypeIndex] = {}
        self._nn_cache: dict[tuple[ResourceType, str], tuple[int, float]] = {}
        for rtype, protos in vocabulary.prototypes_by_type.items():
            sim = sims.get(rtype)
            if sim is None:
                raise ValueError(f"no similarity provided for type {rtype.value!r}")
            self._indexes[rtype] = PrototypeIndex(protos, sim)

    def _nearest(self, rtype: ResourceType, name: str) -> tuple[int, float]:
        key = (rtype, name)
        hit = self._nn_cache.get(key)
        if hit is None:
            proto, score = self._indexes[rtype].query(name)
            hit = (proto.prototype_id, score)
            self._nn_cache[key] = hit
        return hit

    def project_sample(self, sample: SandboxSample) -> np.ndarray:
        vec = np.zeros(len(self.vocabulary), dtype=np.uint8)
        for inst in sorted(sample.instances, key=lambda i: (i.rtype.value, i.name)):
            index = self._indexes.get(inst.rtype)
            if index is None:
                # No prototypes of this type were trained; skip the instance.
                self.skipped_instances += 1
                continue
            pid, score = self._nearest(inst.rtype, inst.name)
            if self.threshold is not None and score <= self.threshold:
                continue
            vec[self.vocabulary.position(("proto", inst.rtype.value, str(pid)))] = 1
        for warning in sample.warnings:
            vec[self.vocabulary.position(("warning", warning.value))] = 1
        return vec

    def project_corpus(self, samples: Sequence[SandboxSample], threads: int = 1) -> np.ndarray:
        if not samples:
            return np.zeros((0, len(self.vocabulary)), dtype=np.uint8)
        if threads > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=threads) as pool:
                rows = list(pool.map(self.project_sample, samples))
        else:
            rows = [self.project_sample(s) for s in samples]
        return np.vstack(rows)


def project_sample(
    sample: SandboxSample,
    vocabulary: Vocabulary,
    sims: Mapping[ResourceType, object],
    threshold: float | None = None,
) -> np.ndarray:
    return Projector(vocabulary, sims, threshold).project_sample(sample)


def project_corpus(
    samples: Sequence[SandboxSample],
    vocabulary: Vocabulary,
    sims: Mapping[ResourceType, object],
    threshold: float | None = None,
    threads: int = 1,
) -> np.ndarray:
    return Projector(vocabulary, sims, threshold).project_corpus(samples, threads=threads)


def write_projection(path, sample_ids: Sequence[str], matrix: np.ndarray) -> None:
    """Sparse row serialization: one JSON object with the set bit indices per sample."""
    with open(path, "w", encoding="utf-8") as fh:
        for sid, row in zip(sample_ids, matrix):
            bits = np.nonzero(row)[0].tolist()
            fh.write(json.dumps({"sample_id": sid, "bits": bits}, sort_keys=True) + "\n")


def read_projection(path, width: int) -> tuple[list[str], np.ndarray]:
    ids: list[str] = []
    rows: list[np.ndarray] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            ids.append(record["sample_id"])
            row = np.zeros(width, dtype=np.uint8)
            row[record["bits"]] = 1
            rows.append(row)
    matrix = np.vstack(rows) if rows else np.zeros((0, width), dtype=np.uint8)
    return ids, matrix
