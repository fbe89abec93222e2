"""Deterministic synthetic corpora for desk-scale testing.

Families are bundles of name templates with randomized segments, so
samples of one family touch resources whose names share a fixed skeleton
and differ only in generated tokens, while different families use disjoint
skeletons. That reproduces the structure the pipeline is built to exploit
without shipping any real malware data.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from .ingest import (
    Label,
    ResourceInstance,
    ResourceType,
    SandboxSample,
    SandboxWarning,
)

__all__ = [
    "FamilySpec",
    "generate_corpus",
    "load_family_specs",
    "demo_family_specs",
    "demo_labeled_paths",
    "DEFAULT_WORD_POOL",
]

_PLACEHOLDER = re.compile(r"\{(hex8|hex4|int|word)\}")

DEFAULT_WORD_POOL = (
    "officetool",
    "paintpro",
    "notekeeper",
    "mediabox",
    "webviewer",
    "calcwidget",
    "photosort",
    "archivemgr",
    "cleansweep",
    "textforge",
    "soundmix",
    "diskscan",
    "mailcourier",
    "chartmaker",
)

# Invented family skeleton words, mutually distant in edit distance.
FAMILY_WORDS = (
    "varekonex",
    "mizulator",
    "grubhexal",
    "peltroskin",
    "janovirex",
    "quazzitrem",
    "drennolpix",
    "suvacklost",
    "ohrmbitzen",
    "fylgratson",
)

_DEFAULT_START = datetime(2024, 1, 1, tzinfo=timezone.utc)
_DEFAULT_END = datetime(2024, 3, 1, tzinfo=timezone.utc)


@dataclass
class FamilySpec:
    """Name templates and sampling ranges for one synthetic family."""

    name: str
    label: Label
    samples: int
    resources: dict[ResourceType, list[str]]
    warning_probs: dict[SandboxWarning, float] = field(default_factory=dict)
    start: datetime = _DEFAULT_START
    end: datetime = _DEFAULT_END
    word_pool: tuple[str, ...] = DEFAULT_WORD_POOL

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if not any(self.resources.values()):
            raise ValueError("family needs at least one template")
        for templates in self.resources.values():
            for template in templates:
                for match in re.finditer(r"\{([^}]*)\}", template):
                    if match.group(1) not in ("hex8", "hex4", "int", "word"):
                        raise ValueError(f"unknown placeholder {{{match.group(1)}}}")

    @classmethod
    def from_dict(cls, payload: dict) -> "FamilySpec":
        return cls(
            name=payload["name"],
            label=Label(payload.get("label", "malicious")),
            samples=int(payload["samples"]),
            resources={
                ResourceType(rtype): list(templates)
                for rtype, templates in payload.get("resources", {}).items()
            },
            warning_probs={
                SandboxWarning(w): float(p)
                for w, p in payload.get("warning_probs", {}).items()
            },
            start=datetime.fromisoformat(payload["start"].replace("Z", "+00:00"))
            if "start" in payload
            else _DEFAULT_START,
            end=datetime.fromisoformat(payload["end"].replace("Z", "+00:00"))
            if "end" in payload
            else _DEFAULT_END,
            word_pool=tuple(payload.get("word_pool", DEFAULT_WORD_POOL)),
        )


def _render(template: str, rng: np.random.Generator, words: tuple[str, ...]) -> str:
    def fill(match: re.Match) -> str:
        kind = match.group(1)
        if kind == "hex8":
            return "".join(rng.choice(list("0123456789abcdef"), size=8))
        if kind == "hex4":
            return "".join(rng.choice(list("0123456789abcdef"), size=4))
        if kind == "int":
            return str(rng.integers(0, 100000))
        return str(words[rng.integers(0, len(words))])

    return _PLACEHOLDER.sub(fill, template)


def generate_corpus(
    specs, benign_spec: FamilySpec | None = None, seed: int = 0
) -> list[SandboxSample]:
    """Render every family spec into samples; deterministic per seed.

    Each family draws from its own seed stream, so adding or removing one
    spec never changes the output of the others. Timestamps are spread
    evenly over the family's range to exercise time-based splits.
    """
    all_specs = list(specs)
    if benign_spec is not None:
        all_specs.append(benign_spec)
    if not all_specs:
        raise ValueError("need at least one family spec")
    streams = np.random.SeedSequence(seed).spawn(len(all_specs))
    samples = []
    for spec, stream in zip(all_specs, streams):
        rng = np.random.default_rng(stream)
        span = (spec.end - spec.start).total_seconds()
        for i in range(spec.samples):
            frac = i / (spec.samples - 1) if spec.samples > 1 else 0.0
            collected = spec.start + timedelta(seconds=span * frac)
            instances = set()
            for rtype, templates in sorted(spec.resources.items(), key=lambda kv: kv[0].value):
                for template in templates:
                    instances.add(
                        ResourceInstance(rtype=rtype, name=_render(template, rng, spec.word_pool))
                    )
            warnings = set()
            for warning, prob in sorted(spec.warning_probs.items(), key=lambda kv: kv[0].value):
                if rng.random() < prob:
                    warnings.add(warning)
            samples.append(
                SandboxSample(
                    sample_id=f"{spec.name}-{i:05d}",
                    collected_at=collected,
                    label=spec.label,
                    instances=frozenset(instances),
                    warnings=frozenset(warnings),
                )
            )
    return samples


def load_family_specs(path) -> tuple[list[FamilySpec], FamilySpec | None]:
    """Read a corpus spec file: {"families": [...], "benign": {...}}."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    families = [FamilySpec.from_dict(f) for f in payload.get("families", [])]
    benign = FamilySpec.from_dict(payload["benign"]) if payload.get("benign") else None
    return families, benign


def demo_family_specs(
    samples_per_family: int = 200,
    benign_samples: int = 1000,
    n_families: int = 10,
) -> tuple[list[FamilySpec], FamilySpec]:
    """The built-in demo scenario: templated malicious families plus diverse benign."""
    if not 1 <= n_families <= len(FAMILY_WORDS):
        raise ValueError(f"n_families must be in [1, {len(FAMILY_WORDS)}]")
    families = []
    for word in FAMILY_WORDS[:n_families]:
        families.append(
            FamilySpec(
                name=word,
                label=Label.MALICIOUS,
                samples=samples_per_family,
                resources={
                    ResourceType.FILE: [
                        "\\Temp\\{hex8}-{hex4}\\" + word + "core.bin",
                        "\\Program Files\\" + word + "suite\\" + word + "host{hex4}.exe",
                    ],
                    ResourceType.MUTEX: [word + "M_{int}_"],
                    ResourceType.REGISTRY: [
                        "HKEY_CURRENT_USER\\Software\\Microsoft\\Windows\\CurrentVersion\\Run\\"
                        + word
                        + "{hex4}"
                    ],
                    ResourceType.NETWORK: ["{hex8}." + word + "-cdn.example"],
                },
                warning_probs={SandboxWarning.DLL_NOT_FOUND: 0.05},
            )
        )
    benign = FamilySpec(
        name="benign",
        label=Label.LEGITIMATE,
        samples=benign_samples,
        resources={
            ResourceType.FILE: [
                "\\Program Files\\{word}\\launcher-{hex4}.exe",
                "\\Documents and Settings\\{word}\\Application Data\\settings-{hex4}.ini",
            ],
            ResourceType.MUTEX: ["{word}AppMutex{int}"],
            ResourceType.REGISTRY: ["HKEY_LOCAL_MACHINE\\Software\\{word}\\Settings"],
            ResourceType.NETWORK: ["intranet.{word}.office.corp"],
        },
        warning_probs={SandboxWarning.DLL_NOT_FOUND: 0.02},
    )
    return families, benign


def demo_name_families(
    per_family: int = 500, n_families: int = 10, seed: int = 0
) -> dict[str, list[str]]:
    """Registry-key name families with a clean similarity gap.

    Within a family only a short random token varies, so intra-family
    similarity stays well above the clustering threshold while any two
    families sit well below it. Returns family word -> unique names.
    """
    if not 1 <= n_families <= len(FAMILY_WORDS):
        raise ValueError(f"n_families must be in [1, {len(FAMILY_WORDS)}]")
    rng = np.random.default_rng(seed)
    hexdigits = list("0123456789abcdef")
    out: dict[str, list[str]] = {}
    prefix = "HKEY_CURRENT_USER\\Software\\Microsoft\\Windows\\CurrentVersion\\Run\\"
    for word in FAMILY_WORDS[:n_families]:
        names: set[str] = set()
        while len(names) < per_family:
            token = "".join(rng.choice(hexdigits, size=4))
            names.add(prefix + word + token)
        out[word] = sorted(names)
    return out


def demo_labeled_paths(per_class: int = 60, seed: int = 0) -> tuple[list[str], list[int]]:
    """Labeled paths whose classes differ only in their known-folder structure.

    Both classes share the distribution of general folders and file names;
    class 0 lives under the windows root and class 1 under temp, so the
    known-folder mismatch is the only stable signal.
    """
    rng = np.random.default_rng(seed)
    basenames = ["report", "cache", "index", "session"]
    paths, classes = [], []
    for cls, root in ((0, "\\Windows\\"), (1, "\\Temp\\")):
        for _ in range(per_class):
            token = "".join(rng.choice(list("0123456789abcdef"), size=8))
            hex4 = "".join(rng.choice(list("0123456789abcdef"), size=4))
            base = basenames[int(rng.integers(0, len(basenames)))]
            paths.append(f"{root}{token}\\{base}-{hex4}.dat")
            classes.append(cls)
    return paths, classes
