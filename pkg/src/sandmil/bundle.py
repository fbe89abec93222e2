"""Persisted model: config snapshot, weights, vocabulary, and forest.

A bundle is a plain directory of JSON files so trained models can be
inspected and diffed. Only the cluster prototypes are stored, never the
training corpus.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .config import PipelineConfig
from .forest import Forest
from .vectorize import Vocabulary

__all__ = ["BundleError", "ModelBundle", "FORMAT_VERSION"]

FORMAT_VERSION = 1

_MANIFEST = "manifest.json"
_VOCABULARY = "vocabulary.json"
_WEIGHTS = "weights.json"
_FOREST = "forest.json"


class BundleError(ValueError):
    pass


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _read_json(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise BundleError(f"missing bundle file: {path}") from None
    except json.JSONDecodeError as exc:
        raise BundleError(f"corrupted bundle file {path}: {exc}") from None


@dataclass
class ModelBundle:
    config: PipelineConfig
    vocabulary: Vocabulary
    forest: Forest
    weights: dict[str, list[float]]
    version: int = FORMAT_VERSION

    def save(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(
            out / _MANIFEST,
            {
                "format_version": self.version,
                "config": self.config.to_dict(),
                "feature_count": len(self.vocabulary),
                "prototype_counts": {
                    rtype.value: len(protos)
                    for rtype, protos in sorted(
                        self.vocabulary.prototypes_by_type.items(), key=lambda kv: kv[0].value
                    )
                },
            },
        )
        _write_json(out / _VOCABULARY, self.vocabulary.to_dict())
        _write_json(out / _WEIGHTS, self.weights)
        _write_json(out / _FOREST, self.forest.to_dict())
        return out

    @classmethod
    def load(cls, bundle_dir) -> "ModelBundle":
        root = Path(bundle_dir)
        manifest = _read_json(root / _MANIFEST)
        version = manifest.get("format_version")
        if version != FORMAT_VERSION:
            raise BundleError(
                f"bundle format version {version!r} is not supported (expected {FORMAT_VERSION})"
            )
        try:
            config = PipelineConfig.from_dict(manifest["config"])
            vocabulary = Vocabulary.from_dict(_read_json(root / _VOCABULARY))
            forest = Forest.from_dict(_read_json(root / _FOREST))
            weights = _read_json(root / _WEIGHTS)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, BundleError):
                raise
            raise BundleError(f"corrupted bundle in {root}: {exc}") from None
        return cls(config=config, vocabulary=vocabulary, forest=forest, weights=weights)
