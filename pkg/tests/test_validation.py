"""Annotation validation against a taxonomy."""

from __future__ import annotations

from swarmhub.core import parse_manifest, validate_annotation

from .conftest import make_manifest, manifest_bytes


def validate_doc(doc, taxonomy):
    return validate_annotation(parse_manifest(manifest_bytes(doc)), taxonomy)


def test_valid_fixture_has_empty_report(default_taxonomy):
    doc = make_manifest(coverage=[
        {"requirement_id": "R1", "level": "full"},
        {"requirement_id": "R2", "level": "partial", "note": "export only"},
    ])
    report = validate_doc(doc, default_taxonomy)
    assert report.ok
    assert len(report) == 0


def test_unknown_requirement_is_error(default_taxonomy):
    doc = make_manifest(coverage=[{"requirement_id": "R99", "level": "full"}])
    report = validate_doc(doc, default_taxonomy)
    assert not report.ok
    assert len(report.errors) == 1
    assert "unknown requirement id" in report.errors[0].message
    assert report.errors[0].path == "coverage[0].requirement_id"


def test_duplicate_coverage_claim_is_error(default_taxonomy):
    doc = make_manifest(coverage=[
        {"requirement_id": "R5", "level": "full"},
        {"requirement_id": "R5", "level": "partial"},
    ])
    report = validate_doc(doc, default_taxonomy)
    assert [v.message for v in report.errors] == ["duplicate coverage claim for 'R5'"]


def test_bad_level_is_error(default_taxonomy):
    doc = make_manifest(coverage=[{"requirement_id": "R1", "level": "maybe"}])
    report = validate_doc(doc, default_taxonomy)
    assert any("unknown coverage level" in v.message for v in report.errors)


def test_unknown_keys_warn_but_do_not_block(default_taxonomy):
    doc = make_manifest(banana="split")
    report = validate_doc(doc, default_taxonomy)
    assert report.ok
    assert any(v.path == "banana" for v in report.warnings)


def test_missing_identity_fields_are_errors(default_taxonomy):
    report = validate_annotation(parse_manifest(b"{}"), default_taxonomy)
    paths = {v.path for v in report.errors}
    assert {"tool_id", "name", "version"} <= paths


def test_descriptor_checks(default_taxonomy):
    doc = make_manifest(descriptors=[
        {
            "function_name": "search",
            "description": "",
            "parameters": [
                {"name": "q", "type": "string", "description": "query", "required": True},
                {"name": "q", "type": "integer", "description": "dup", "required": False},
                {"name": "mode", "type": "enum", "description": "mode", "required": False},
            ],
            "binding": {
                "method": "FETCH",
                "url_template": "https://x.example/{missing}",
                "body_params": ["q", "unknown"],
                "timeout": 0,
            },
        },
        {
            "function_name": "search",
            "description": "Duplicate of the first function name.",
            "parameters": [],
            "binding": {"method": "GET", "url_template": "https://x.example/"},
        },
    ])
    report = validate_doc(doc, default_taxonomy)
    messages = "\n".join(v.message for v in report.errors)
    assert "empty description" in messages
    assert "duplicate parameter name" in messages
    assert "enum parameter declares no values" in messages
    assert "unsupported HTTP method" in messages
    assert "placeholder {missing}" in messages
    assert "names no declared parameter" in messages
    assert "timeout must be positive" in messages
    assert "duplicate function name" in messages


def test_url_and_body_overlap_is_error(default_taxonomy):
    doc = make_manifest(descriptors=[{
        "function_name": "post_item",
        "description": "Create an item.",
        "parameters": [
            {"name": "item", "type": "string", "description": "payload", "required": True},
        ],
        "binding": {
            "method": "POST",
            "url_template": "https://x.example/items/{item}",
            "body_params": ["item"],
            "timeout": 5,
        },
    }])
    report = validate_doc(doc, default_taxonomy)
    assert any("both URL and body" in v.message for v in report.errors)


def test_report_sorted_by_path_and_pure(default_taxonomy):
    doc = make_manifest(
        coverage=[{"requirement_id": "R99", "level": "huge"}],
        zebra_key=1,
        alpha_key=2,
    )
    annotation = parse_manifest(manifest_bytes(doc))
    first = validate_annotation(annotation, default_taxonomy)
    second = validate_annotation(annotation, default_taxonomy)
    assert first == second
    paths = [v.path for v in first.violations]
    assert paths == sorted(paths)


def test_non_semver_version_warns(default_taxonomy):
    report = validate_doc(make_manifest(version="v2-final"), default_taxonomy)
    assert report.ok
    assert any(v.path == "version" for v in report.warnings)
