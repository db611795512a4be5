"""Tool annotation manifests: parsing, canonical serialization, hashing.

A manifest is the `swarm-tool.json` document a tool's developers publish.
Parsing is lenient about missing fields (validation reports them as
violations); it is strict about structural types so downstream code can
rely on the shapes. Unknown top-level keys are preserved round-trip.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field, replace

from .errors import ParseError

MANIFEST_FILENAME = "swarm-tool.json"

MANIFEST_KEYS = (
    "tool_id",
    "name",
    "version",
    "description",
    "homepage",
    "license",
    "descriptors",
    "coverage",
)

PARAMETER_TYPES = ("string", "integer", "number", "boolean", "enum")
COVERAGE_LEVELS = ("none", "partial", "full")
HTTP_METHODS = ("GET", "POST", "PUT", "PATCH", "DELETE", "HEAD")

_SEMVER_RE = re.compile(
    r"^(\d+)\.(\d+)\.(\d+)(?:-([0-9A-Za-z.-]+))?(?:\+[0-9A-Za-z.-]+)?$"
)


@dataclass(frozen=True)
class ToolParameter:
    name: str
    type: str
    description: str = ""
    required: bool = False
    enum_values: tuple[str, ...] = ()


@dataclass(frozen=True)
class ExecutionBinding:
    method: str = "GET"
    url_template: str = ""
    body_params: tuple[str, ...] = ()
    timeout: float = 10.0
    expected_media_type: str = "application/json"

    def placeholders(self) -> tuple[str, ...]:
        return tuple(re.findall(r"\{([A-Za-z0-9_]+)\}", self.url_template))


@dataclass(frozen=True)
class ToolDescriptor:
    function_name: str
    description: str = ""
    parameters: tuple[ToolParameter, ...] = ()
    binding: ExecutionBinding = ExecutionBinding()

    def parameter(self, name: str) -> ToolParameter | None:
        for param in self.parameters:
            if param.name == name:
                return param
        return None


@dataclass(frozen=True)
class CoverageClaim:
    requirement_id: str
    level: str
    note: str | None = None


@dataclass(frozen=True)
class ToolAnnotation:
    """One tool's registry record. (tool_id, version) is the primary key."""

    tool_id: str = ""
    name: str = ""
    version: str = ""
    description: str = ""
    homepage: str = ""
    license: str = ""
    descriptors: tuple[ToolDescriptor, ...] = ()
    coverage: tuple[CoverageClaim, ...] = ()
    origin: str = "direct"
    extras: dict = field(default_factory=dict)

    @property
    def key(self) -> tuple[str, str]:
        return (self.tool_id, self.version)

    @property
    def content_hash(self) -> str:
        """Hex digest of the canonical manifest bytes (origin excluded)."""
        return hashlib.sha256(canonical_manifest_bytes(self)).hexdigest()

    def descriptor(self, function_name: str) -> ToolDescriptor | None:
        for desc in self.descriptors:
            if desc.function_name == function_name:
                return desc
        return None

    def with_origin(self, origin: str) -> "ToolAnnotation":
        return replace(self, origin=origin)


def semver_key(version: str) -> tuple:
    """Sort key implementing semantic-version ordering.

    Non-semver strings sort below every semver string, ordered textually,
    so catalogues containing sloppy versions still order deterministically.
    """
    match = _SEMVER_RE.match(version.strip())
    if match is None:
        return (0, (), version)
    major, minor, patch = (int(match.group(i)) for i in (1, 2, 3))
    prerelease = match.group(4)
    if prerelease is None:
        pre_key: tuple = (1,)
    else:
        parts = []
        for ident in prerelease.split("."):
            if ident.isdigit():
                parts.append((0, int(ident), ""))
            else:
                parts.append((1, 0, ident))
        pre_key = (0, tuple(parts))
    return (1, (major, minor, patch), pre_key)


def _expect(condition: bool, message: str) -> None:
    if not condition:
        raise ParseError(message)


def _parse_parameter(raw: object, where: str) -> ToolParameter:
    _expect(isinstance(raw, dict), f"{where}: parameter must be an object")
    assert isinstance(raw, dict)
    enum_values = raw.get("enum_values", raw.get("enum", []))
    _expect(isinstance(enum_values, list), f"{where}: enum_values must be a list")
    return ToolParameter(
        name=str(raw.get("name", "")),
        type=str(raw.get("type", "")),
        description=str(raw.get("description", "")),
        required=bool(raw.get("required", False)),
        enum_values=tuple(str(v) for v in enum_values),
    )


def _parse_binding(raw: object, where: str) -> ExecutionBinding:
    if raw is None:
        return ExecutionBinding()
    _expect(isinstance(raw, dict), f"{where}: binding must be an object")
    assert isinstance(raw, dict)
    body_params = raw.get("body_params", [])
    _expect(isinstance(body_params, list), f"{where}: body_params must be a list")
    timeout = raw.get("timeout", 10.0)
    _expect(isinstance(timeout, (int, float)) and not isinstance(timeout, bool),
            f"{where}: timeout must be a number")
    return ExecutionBinding(
        method=str(raw.get("method", "GET")).upper(),
        url_template=str(raw.get("url_template", "")),
        body_params=tuple(str(p) for p in body_params),
        timeout=float(timeout),
        expected_media_type=str(raw.get("expected_media_type", "application/json")),
    )


def _parse_descriptor(raw: object, index: int) -> ToolDescriptor:
    where = f"descriptors[{index}]"
    _expect(isinstance(raw, dict), f"{where}: descriptor must be an object")
    assert isinstance(raw, dict)
    params_raw = raw.get("parameters", [])
    _expect(isinstance(params_raw, list), f"{where}: parameters must be a list")
    return ToolDescriptor(
        function_name=str(raw.get("function_name", "")),
        description=str(raw.get("description", "")),
        parameters=tuple(
            _parse_parameter(p, f"{where}.parameters[{i}]") for i, p in enumerate(params_raw)
        ),
        binding=_parse_binding(raw.get("binding"), f"{where}.binding"),
    )


def parse_manifest(data: bytes | str) -> ToolAnnotation:
    """Parse manifest bytes into an annotation.

    Missing fields default to empty values and surface later as validation
    violations; only structural type errors raise ParseError here.
    """
    try:
        doc = json.loads(data)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"not valid JSON: {exc}") from exc
    _expect(isinstance(doc, dict), "manifest must be a JSON object")

    descriptors_raw = doc.get("descriptors", [])
    _expect(isinstance(descriptors_raw, list), "descriptors must be a list")
    coverage_raw = doc.get("coverage", [])
    _expect(isinstance(coverage_raw, list), "coverage must be a list")

    claims = []
    for i, raw in enumerate(coverage_raw):
        _expect(isinstance(raw, dict), f"coverage[{i}] must be an object")
        note = raw.get("note")
        claims.append(
            CoverageClaim(
                requirement_id=str(raw.get("requirement_id", "")),
                level=str(raw.get("level", "")),
                note=None if note is None else str(note),
            )
        )

    extras = {k: v for k, v in doc.items() if k not in MANIFEST_KEYS}
    return ToolAnnotation(
        tool_id=str(doc.get("tool_id", "")),
        name=str(doc.get("name", "")),
        version=str(doc.get("version", "")),
        description=str(doc.get("description", "")),
        homepage=str(doc.get("homepage", "")),
        license=str(doc.get("license", "")),
        descriptors=tuple(_parse_descriptor(d, i) for i, d in enumerate(descriptors_raw)),
        coverage=tuple(claims),
        extras=extras,
    )


def descriptor_dict(descriptor: ToolDescriptor) -> dict:
    return {
        "function_name": descriptor.function_name,
        "description": descriptor.description,
        "parameters": [
            {
                "name": p.name,
                "type": p.type,
                "description": p.description,
                "required": p.required,
                **({"enum_values": list(p.enum_values)} if p.enum_values else {}),
            }
            for p in descriptor.parameters
        ],
        "binding": {
            "method": descriptor.binding.method,
            "url_template": descriptor.binding.url_template,
            "body_params": list(descriptor.binding.body_params),
            "timeout": descriptor.binding.timeout,
            "expected_media_type": descriptor.binding.expected_media_type,
        },
    }


def descriptor_from_dict(raw: dict) -> ToolDescriptor:
    return _parse_descriptor(raw, 0)


def manifest_dict(annotation: ToolAnnotation) -> dict:
    """The manifest document as plain data, known keys first, extras after."""
    doc: dict = {
        "tool_id": annotation.tool_id,
        "name": annotation.name,
        "version": annotation.version,
        "description": annotation.description,
        "homepage": annotation.homepage,
        "license": annotation.license,
        "descriptors": [descriptor_dict(d) for d in annotation.descriptors],
        "coverage": [
            {
                "requirement_id": c.requirement_id,
                "level": c.level,
                **({"note": c.note} if c.note is not None else {}),
            }
            for c in annotation.coverage
        ],
    }
    for key in sorted(annotation.extras):
        doc[key] = annotation.extras[key]
    return doc


def canonical_manifest_bytes(annotation: ToolAnnotation) -> bytes:
    """Canonical form used for hashing: sorted keys, compact, UTF-8, LF."""
    text = json.dumps(
        manifest_dict(annotation), sort_keys=True, ensure_ascii=False,
        separators=(",", ":"),
    )
    return (text + "\n").encode("utf-8")


def serialize_manifest(annotation: ToolAnnotation) -> bytes:
    """Human-oriented serialization (stable key order, indented)."""
    text = json.dumps(manifest_dict(annotation), indent=2, ensure_ascii=False)
    return (text + "\n").encode("utf-8")
