"""Coverage scoring: how well each tool supports each workflow step.

A step score is the mean claim weight over the requirements mapped to the
step, so scores stay in [0, 1] and are comparable across steps with
different requirement counts.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence

from .errors import IntegrityError, UnknownStep
from .manifest import ToolAnnotation, semver_key
from .taxonomy import Taxonomy
from .validation import validate_annotation

DEFAULT_LEVEL_WEIGHTS: Mapping[str, float] = {"none": 0.0, "partial": 0.5, "full": 1.0}


def _checked(annotations: Sequence[ToolAnnotation], taxonomy: Taxonomy) -> None:
    for annotation in annotations:
        report = validate_annotation(annotation, taxonomy)
        if not report.ok:
            first = report.errors[0]
            raise IntegrityError(
                f"annotation {annotation.tool_id!r} fails validation: "
                f"{first.path}: {first.message}"
            )


def step_score(
    annotation: ToolAnnotation,
    step_id: str,
    taxonomy: Taxonomy,
    weights: Mapping[str, float] = DEFAULT_LEVEL_WEIGHTS,
) -> float:
    """Aggregated claim weight for one step; 0 when no requirements map to it."""
    if step_id not in taxonomy.step_ids:
        raise UnknownStep(step_id)
    reqs = taxonomy.requirements_by_step.get(step_id, ())
    if not reqs:
        return 0.0
    levels = {claim.requirement_id: claim.level for claim in annotation.coverage}
    total = sum(weights.get(levels.get(req.id, "none"), 0.0) for req in reqs)
    return total / len(reqs)


def coverage_matrix(
    annotations: Sequence[ToolAnnotation],
    taxonomy: Taxonomy,
    weights: Mapping[str, float] = DEFAULT_LEVEL_WEIGHTS,
) -> dict[str, dict[str, float]]:
    """Matrix tool_id -> step_id -> score over the whole taxonomy.

    Input annotations must validate and carry distinct tool ids (one
    catalogue row per tool); violations raise IntegrityError.
    """
    _checked(annotations, taxonomy)
    seen: set[str] = set()
    matrix: dict[str, dict[str, float]] = {}
    for annotation in annotations:
        if annotation.tool_id in seen:
            raise IntegrityError(f"duplicate tool id {annotation.tool_id!r} in input")
        seen.add(annotation.tool_id)
        matrix[annotation.tool_id] = {
            step.id: step_score(annotation, step.id, taxonomy, weights)
            for step in taxonomy.steps_in_order
        }
    return matrix


def rank_tools_for_step(
    step_id: str,
    annotations: Sequence[ToolAnnotation],
    taxonomy: Taxonomy,
    weights: Mapping[str, float] = DEFAULT_LEVEL_WEIGHTS,
) -> list[tuple[str, float]]:
    """Tools ordered by descending step score; zero-score tools excluded.

    Ties break by ascending tool_id, then descending version (relevant only
    when the caller passes several versions of one tool).
    """
    if step_id not in taxonomy.step_ids:
        raise UnknownStep(step_id)
    _checked(annotations, taxonomy)
    scored = [
        (annotation, step_score(annotation, step_id, taxonomy, weights))
        for annotation in annotations
    ]
    ranked = sorted(
        (entry for entry in scored if entry[1] > 0.0),
        key=lambda entry: (-entry[1], entry[0].tool_id, _descending(semver_key(entry[0].version))),
    )
    return [(annotation.tool_id, score) for annotation, score in ranked]


class _descending:
    """Inverts comparison of an arbitrary key, for mixed-direction sorts."""

    __slots__ = ("key",)

    def __init__(self, key: object) -> None:
        self.key = key

    def __lt__(self, other: "_descending") -> bool:
        return other.key < self.key  # type: ignore[operator]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, _descending) and other.key == self.key
