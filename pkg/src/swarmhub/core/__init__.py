"""Pure data logic: taxonomy, manifests, validation, coverage queries."""

from .coverage import (
    DEFAULT_LEVEL_WEIGHTS,
    coverage_matrix,
    rank_tools_for_step,
    step_score,
)
from .errors import IntegrityError, ParseError, UnknownStep
from .manifest import (
    MANIFEST_FILENAME,
    CoverageClaim,
    ExecutionBinding,
    ToolAnnotation,
    ToolDescriptor,
    ToolParameter,
    canonical_manifest_bytes,
    descriptor_dict,
    descriptor_from_dict,
    manifest_dict,
    parse_manifest,
    semver_key,
    serialize_manifest,
)
from .taxonomy import (
    Requirement,
    Stage,
    Step,
    Task,
    Taxonomy,
    default_taxonomy_bytes,
    load_default_taxonomy,
    load_taxonomy,
)
from .validation import ValidationReport, Violation, validate_annotation

__all__ = [
    "DEFAULT_LEVEL_WEIGHTS",
    "MANIFEST_FILENAME",
    "CoverageClaim",
    "ExecutionBinding",
    "IntegrityError",
    "ParseError",
    "Requirement",
    "Stage",
    "Step",
    "Task",
    "Taxonomy",
    "ToolAnnotation",
    "ToolDescriptor",
    "ToolParameter",
    "UnknownStep",
    "ValidationReport",
    "Violation",
    "canonical_manifest_bytes",
    "coverage_matrix",
    "default_taxonomy_bytes",
    "descriptor_dict",
    "descriptor_from_dict",
    "load_default_taxonomy",
    "load_taxonomy",
    "manifest_dict",
    "parse_manifest",
    "rank_tools_for_step",
    "semver_key",
    "serialize_manifest",
    "step_score",
    "validate_annotation",
]
