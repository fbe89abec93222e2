"""Parse sandbox behavior reports into samples, labels, and instance sets.

A report file holds one JSON record per line. Each record describes one
executed binary: the resources it touched, sandbox warnings, and either an
explicit label or raw AV verdict counts the label is derived from.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Sequence

__all__ = [
    "ResourceType",
    "SandboxWarning",
    "Label",
    "ResourceInstance",
    "SandboxSample",
    "VerdictSummary",
    "ParseError",
    "parse_report",
    "serialize_sample",
    "load_reports",
    "write_reports",
    "extract_instances",
    "label_from_verdicts",
    "split_by_time",
]


class ResourceType(str, enum.Enum):
    FILE = "file"
    REGISTRY = "registry"
    MUTEX = "mutex"
    NETWORK = "network"


class SandboxWarning(str, enum.Enum):
    DLL_NOT_FOUND = "dll_not_found"
    INCORRECT_CHECKSUM = "incorrect_checksum"
    DID_NOT_EXECUTE = "did_not_execute"


class Label(str, enum.Enum):
    MALICIOUS = "malicious"
    LEGITIMATE = "legitimate"
    UNKNOWN = "unknown"


# Wire strings for warnings, as emitted by the sandboxing environment.
WARNING_FROM_WIRE = {
    "dll not found": SandboxWarning.DLL_NOT_FOUND,
    "incorrect executable checksum": SandboxWarning.INCORRECT_CHECKSUM,
    "sample did not execute": SandboxWarning.DID_NOT_EXECUTE,
}
WARNING_TO_WIRE = {v: k for k, v in WARNING_FROM_WIRE.items()}


class ParseError(ValueError):
    """A report record could not be parsed; carries line context."""

    def __init__(self, message: str, line_no: int | None = None):
        where = f"line {line_no}: " if line_no is not None else ""
        super().__init__(f"{where}{message}")
        self.line_no = line_no


@dataclass(frozen=True)
class ResourceInstance:
    """One (resource type, name) pair a binary interacted with."""

    rtype: ResourceType
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("instance name must be non-empty")


@dataclass(frozen=True)
class VerdictSummary:
    """Counts of AV engines that flagged a file."""

    detections: int
    engines_total: int

    def __post_init__(self):
        if self.engines_total < 1:
            raise ValueError("engines_total must be positive")
        if not 0 <= self.detections <= self.engines_total:
            raise ValueError("detections must be in [0, engines_total]")


@dataclass(frozen=True)
class SandboxSample:
    """One executed binary: identity, label, resource instances, warnings."""

    sample_id: str
    collected_at: datetime
    label: Label
    instances: frozenset[ResourceInstance] = field(default_factory=frozenset)
    warnings: frozenset[SandboxWarning] = field(default_factory=frozenset)

    def names_of_type(self, rtype: ResourceType) -> set[str]:
        return {i.name for i in self.instances if i.rtype == rtype}


def label_from_verdicts(v: VerdictSummary, threshold: int = 4) -> Label:
    """Malicious at or above the detection threshold, legitimate at zero, unknown between."""
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    if v.detections >= threshold:
        return Label.MALICIOUS
    if v.detections == 0:
        return Label.LEGITIMATE
    return Label.UNKNOWN


def _parse_timestamp(raw: str) -> datetime:
    text = raw.replace("Z", "+00:00") if raw.endswith("Z") else raw
    try:
        ts = datetime.fromisoformat(text)
    except ValueError as exc:
        raise ValueError(f"bad timestamp {raw!r}: {exc}") from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def parse_report(line: str, line_no: int | None = None) -> SandboxSample:
    """Parse one JSONL report record into a sample.

    Instances deduplicate under set semantics. Unknown resource types and
    warning strings are rejected. The label comes from the explicit field
    when present, from the verdict counts otherwise, and defaults to
    unknown.
    """
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", line_no) from None
    if not isinstance(record, dict):
        raise ParseError("record is not an object", line_no)
    try:
        sample_id = record["sample_id"]
        collected_at = _parse_timestamp(record["collected_at"])
    except KeyError as exc:
        raise ParseError(f"missing field {exc.args[0]!r}", line_no) from None
    except ValueError as exc:
        raise ParseError(str(exc), line_no) from None
    if not isinstance(sample_id, str) or not sample_id:
        raise ParseError("sample_id must be a non-empty string", line_no)

    instances = set()
    for res in record.get("resources", []):
        try:
            rtype = ResourceType(res["type"])
        except (ValueError, KeyError, TypeError):
            raise ParseError(f"unknown resource type in {res!r}", line_no) from None
        name = res.get("name")
        if not isinstance(name, str) or not name:
            raise ParseError(f"resource name must be a non-empty string in {res!r}", line_no)
        instances.add(ResourceInstance(rtype=rtype, name=name))

    warnings = set()
    for w in record.get("warnings", []):
        mapped = WARNING_FROM_WIRE.get(w)
        if mapped is None:
            raise ParseError(f"unknown warning {w!r}", line_no)
        warnings.add(mapped)

    raw_label = record.get("label")
    if raw_label is not None:
        try:
            label = Label(raw_label)
        except ValueError:
            raise ParseError(f"unknown label {raw_label!r}", line_no) from None
    elif "verdicts" in record:
        v = record["verdicts"]
        try:
            summary = VerdictSummary(int(v["detections"]), int(v["engines_total"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad verdicts {v!r}: {exc}", line_no) from None
        label = label_from_verdicts(summary)
    else:
        label = Label.UNKNOWN

    return SandboxSample(
        sample_id=sample_id,
        collected_at=collected_at,
        label=label,
        instances=frozenset(instances),
        warnings=frozenset(warnings),
    )


def serialize_sample(sample: SandboxSample) -> str:
    """One canonical JSON line; parse(serialize(s)) == s."""
    record = {
        "sample_id": sample.sample_id,
        "collected_at": sample.collected_at.astimezone(timezone.utc)
        .isoformat()
        .replace("+00:00", "Z"),
        "label": sample.label.value,
        "resources": [
            {"type": i.rtype.value, "name": i.name}
            for i in sorted(sample.instances, key=lambda i: (i.rtype.value, i.name))
        ],
        "warnings": sorted(WARNING_TO_WIRE[w] for w in sample.warnings),
    }
    return json.dumps(record, sort_keys=True)


def load_reports(path) -> list[SandboxSample]:
    """Load a JSONL report file; blank lines are skipped, duplicate ids rejected."""
    samples = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            sample = parse_report(line, line_no)
            if sample.sample_id in seen:
                raise ParseError(f"duplicate sample_id {sample.sample_id!r}", line_no)
            seen.add(sample.sample_id)
            samples.append(sample)
    return samples


def write_reports(samples: Iterable[SandboxSample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sample in samples:
            fh.write(serialize_sample(sample) + "\n")


def extract_instances(samples: Sequence[SandboxSample]) -> dict[ResourceType, set[str]]:
    """Per-type union of instance names across all samples."""
    out: dict[ResourceType, set[str]] = {}
    for sample in samples:
        for inst in sample.instances:
            out.setdefault(inst.rtype, set()).add(inst.name)
    return out


def split_by_time(
    samples: Sequence[SandboxSample], cutoff: datetime
) -> tuple[list[SandboxSample], list[SandboxSample]]:
    """Partition by collection time: strictly before the cutoff trains, the rest tests."""
    if cutoff.tzinfo is None:
        cutoff = cutoff.replace(tzinfo=timezone.utc)
    train = [s for s in samples if s.collected_at < cutoff]
    test = [s for s in samples if s.collected_at >= cutoff]
    return train, test
