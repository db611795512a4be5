"""Schema-conformance gate for tool annotations.

Violations are data, not exceptions: the registry rejects manifests whose
report contains errors and tolerates ones with only warnings.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from urllib.parse import urlparse

from .manifest import (
    COVERAGE_LEVELS,
    HTTP_METHODS,
    PARAMETER_TYPES,
    ToolAnnotation,
    _SEMVER_RE,
)
from .taxonomy import Taxonomy

ERROR = "error"
WARNING = "warning"

# Slug or reverse-domain, e.g. "zotero" or "org.example.ask".
_TOOL_ID_RE = re.compile(r"^[A-Za-z0-9]([A-Za-z0-9_-]*[A-Za-z0-9])?"
                         r"(\.[A-Za-z0-9]([A-Za-z0-9_-]*[A-Za-z0-9])?)*$")
_IDENTIFIER_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class Violation:
    path: str
    severity: str
    message: str

    def to_dict(self) -> dict:
        return {"path": self.path, "severity": self.severity, "message": self.message}


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def errors(self) -> tuple[Violation, ...]:
        return tuple(v for v in self.violations if v.severity == ERROR)

    @property
    def warnings(self) -> tuple[Violation, ...]:
        return tuple(v for v in self.violations if v.severity == WARNING)

    @property
    def ok(self) -> bool:
        """True when the annotation may enter the catalogue."""
        return not self.errors

    def to_list(self) -> list[dict]:
        return [v.to_dict() for v in self.violations]

    def __bool__(self) -> bool:
        return bool(self.violations)

    def __len__(self) -> int:
        return len(self.violations)


class _Collector:
    def __init__(self) -> None:
        self.items: list[Violation] = []

    def error(self, path: str, message: str) -> None:
        self.items.append(Violation(path, ERROR, message))

    def warning(self, path: str, message: str) -> None:
        self.items.append(Violation(path, WARNING, message))

    def report(self) -> ValidationReport:
        # Deterministic: ordered by field path, then severity, then message.
        ordered = sorted(self.items, key=lambda v: (v.path, v.severity, v.message))
        return ValidationReport(tuple(ordered))


def _check_descriptor(out: _Collector, annotation: ToolAnnotation, index: int) -> None:
    desc = annotation.descriptors[index]
    base = f"descriptors[{index}]"
    if not desc.function_name:
        out.error(f"{base}.function_name", "missing or empty function name")
    elif not _IDENTIFIER_RE.match(desc.function_name):
        out.error(f"{base}.function_name",
                  f"invalid function name {desc.function_name!r}")
    if not desc.description.strip():
        out.error(f"{base}.description",
                  "empty description (function calling relies on it)")

    seen_params: set[str] = set()
    declared: set[str] = set()
    for i, param in enumerate(desc.parameters):
        ppath = f"{base}.parameters[{i}]"
        if not param.name:
            out.error(f"{ppath}.name", "missing or empty parameter name")
        elif param.name in seen_params:
            out.error(f"{ppath}.name", f"duplicate parameter name {param.name!r}")
        seen_params.add(param.name)
        declared.add(param.name)
        if param.type not in PARAMETER_TYPES:
            out.error(f"{ppath}.type",
                      f"unknown parameter type {param.type!r} "
                      f"(expected one of {', '.join(PARAMETER_TYPES)})")
        if param.type == "enum" and not param.enum_values:
            out.error(f"{ppath}.enum_values", "enum parameter declares no values")
        if param.type != "enum" and param.enum_values:
            out.warning(f"{ppath}.enum_values",
                        "enum_values ignored for non-enum parameter")

    binding = desc.binding
    bpath = f"{base}.binding"
    if binding.method not in HTTP_METHODS:
        out.error(f"{bpath}.method", f"unsupported HTTP method {binding.method!r}")
    if not binding.url_template:
        out.error(f"{bpath}.url_template", "missing URL template")
    if binding.timeout <= 0:
        out.error(f"{bpath}.timeout", "timeout must be positive")
    placeholders = binding.placeholders()
    for name in placeholders:
        if name not in declared:
            out.error(f"{bpath}.url_template",
                      f"placeholder {{{name}}} names no declared parameter")
    for i, name in enumerate(binding.body_params):
        if name not in declared:
            out.error(f"{bpath}.body_params[{i}]",
                      f"body parameter {name!r} names no declared parameter")
        if name in placeholders:
            out.error(f"{bpath}.body_params[{i}]",
                      f"parameter {name!r} appears in both URL and body")
    if binding.body_params and binding.method == "GET":
        out.warning(f"{bpath}.body_params",
                    "body parameters on GET are sent as query parameters")


def validate_annotation(annotation: ToolAnnotation, taxonomy: Taxonomy) -> ValidationReport:
    """Pure check of all annotation invariants against the given taxonomy."""
    out = _Collector()

    if not annotation.tool_id:
        out.error("tool_id", "missing or empty tool id")
    elif not _TOOL_ID_RE.match(annotation.tool_id):
        out.error("tool_id", f"invalid tool id {annotation.tool_id!r} "
                             "(expected slug or reverse-domain form)")
    if not annotation.name.strip():
        out.error("name", "missing or empty name")
    if not annotation.version:
        out.error("version", "missing or empty version")
    elif not _SEMVER_RE.match(annotation.version):
        out.warning("version", f"version {annotation.version!r} is not semantic "
                               "versioning; ordering falls back to text")
    if not annotation.description.strip():
        out.warning("description", "empty description")
    if annotation.homepage:
        parsed = urlparse(annotation.homepage)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            out.warning("homepage", f"homepage {annotation.homepage!r} is not an "
                                    "absolute http(s) URL")
    if not annotation.license.strip():
        out.warning("license", "missing license")

    seen_functions: set[str] = set()
    for i, desc in enumerate(annotation.descriptors):
        if desc.function_name and desc.function_name in seen_functions:
            out.error(f"descriptors[{i}].function_name",
                      f"duplicate function name {desc.function_name!r}")
        seen_functions.add(desc.function_name)
        _check_descriptor(out, annotation, i)

    seen_requirements: set[str] = set()
    for i, claim in enumerate(annotation.coverage):
        cpath = f"coverage[{i}]"
        if claim.requirement_id in seen_requirements:
            out.error(f"{cpath}.requirement_id",
                      f"duplicate coverage claim for {claim.requirement_id!r}")
        seen_requirements.add(claim.requirement_id)
        if claim.requirement_id not in taxonomy.requirement_ids:
            out.error(f"{cpath}.requirement_id",
                      f"unknown requirement id {claim.requirement_id!r}")
        if claim.level not in COVERAGE_LEVELS:
            out.error(f"{cpath}.level",
                      f"unknown coverage level {claim.level!r} "
                      f"(expected one of {', '.join(COVERAGE_LEVELS)})")

    for key in sorted(annotation.extras):
        out.warning(key, f"unknown manifest key {key!r} (preserved but ignored)")

    return out.report()
