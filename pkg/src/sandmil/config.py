"""Pipeline configuration: one flat JSON file covering similarity,
clustering, classifier, and weight-optimizer settings."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields

from .ckta import OptimizerConfig
from .clustering import ApproxConfig
from .forest import ForestConfig
from .similarity import (
    DEFAULT_FILE_KNOWN_FOLDERS,
    DEFAULT_FILE_WEIGHTS,
    DEFAULT_REGISTRY_KNOWN_FOLDERS,
    DEFAULT_REGISTRY_WEIGHTS,
    SimilarityConfig,
)

__all__ = ["PipelineConfig", "load_config"]


@dataclass
class PipelineConfig:
    # similarity
    file_known_folders: tuple[str, ...] = tuple(sorted(DEFAULT_FILE_KNOWN_FOLDERS))
    registry_known_folders: tuple[str, ...] = tuple(sorted(DEFAULT_REGISTRY_KNOWN_FOLDERS))
    file_weights: tuple[float, ...] = DEFAULT_FILE_WEIGHTS
    registry_weights: tuple[float, ...] = DEFAULT_REGISTRY_WEIGHTS
    lowercase: bool = True
    # clustering
    k: int = 100_000
    m: int = 10
    epsilon: float = 0.4
    edge_floor: float | None = None
    max_cluster_iterations: int = 50
    # projection
    projection_threshold: bool = False
    # forest
    trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    criterion: str = "gini"
    features_per_split: int | None = None
    bootstrap: bool = True
    # weight optimizer
    batch_size: int = 64
    epochs: int = 50
    learning_rate: float = 0.1
    initial_weights: tuple[float, ...] = (1.0,) * 9
    # labeling
    label_threshold: int = 4

    def similarity_config(self) -> SimilarityConfig:
        return SimilarityConfig(
            file_known_folders=frozenset(f.lower() for f in self.file_known_folders),
            registry_known_folders=frozenset(f.lower() for f in self.registry_known_folders),
            file_weights=tuple(self.file_weights),
            registry_weights=tuple(self.registry_weights),
            lowercase=self.lowercase,
        )

    def approx_config(self, seed: int = 0) -> ApproxConfig:
        return ApproxConfig(
            k=self.k,
            m=self.m,
            epsilon=self.epsilon,
            seed=seed,
            edge_floor=self.edge_floor,
            max_iterations=self.max_cluster_iterations,
        )

    def forest_config(self, seed: int = 0) -> ForestConfig:
        return ForestConfig(
            trees=self.trees,
            max_depth=self.max_depth,
            min_samples_split=self.min_samples_split,
            criterion=self.criterion,
            features_per_split=self.features_per_split,
            bootstrap=self.bootstrap,
            seed=seed,
        )

    def optimizer_config(self, seed: int = 0) -> OptimizerConfig:
        return OptimizerConfig(
            batch_size=self.batch_size,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            initial_weights=tuple(self.initial_weights),
            seed=seed,
        )

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for f in fields(cls):
            if f.name not in payload:
                continue
            value = payload[f.name]
            kwargs[f.name] = tuple(value) if isinstance(value, list) else value
        return cls(**kwargs)


def load_config(path) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return PipelineConfig.from_dict(json.load(fh))
