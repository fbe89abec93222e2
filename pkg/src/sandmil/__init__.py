"""sandmil: classify sandboxed binaries from the resource names they touch.

The pipeline clusters file, registry, mutex, and network resource names
with type-specific similarities, projects each sample onto the resulting
cluster vocabulary as a binary vector, and classifies with a decision
forest.
"""

__version__ = "0.1.0"

from .bundle import ModelBundle
from .config import PipelineConfig
from .ingest import (
    Label,
    ResourceInstance,
    ResourceType,
    SandboxSample,
    SandboxWarning,
    load_reports,
    parse_report,
)

__all__ = [
    "__version__",
    "ModelBundle",
    "PipelineConfig",
    "Label",
    "ResourceInstance",
    "ResourceType",
    "SandboxSample",
    "SandboxWarning",
    "load_reports",
    "parse_report",
]
