"""Requirement taxonomy: the stage/task/step hierarchy plus requirements.

The taxonomy is configuration, not code: the bundled default document ships
with the package and can be replaced per deployment. Every tool annotation
is validated against the taxonomy of the running deployment.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import cached_property
from importlib import resources

from .errors import IntegrityError, ParseError

_STEP_ID_RE = re.compile(r"^(\d+)\.(\d+)$")


@dataclass(frozen=True)
class Step:
    id: str
    title: str
    description: str = ""


@dataclass(frozen=True)
class Task:
    id: int
    title: str
    description: str = ""
    steps: tuple[Step, ...] = ()


@dataclass(frozen=True)
class Stage:
    id: str
    title: str
    description: str = ""
    tasks: tuple[Task, ...] = ()


@dataclass(frozen=True)
class Requirement:
    id: str
    statement: str
    step_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class Taxonomy:
    """Validated stage->task->step hierarchy with requirements mapped to steps."""

    schema_version: str
    stages: tuple[Stage, ...]
    requirements: tuple[Requirement, ...]

    @cached_property
    def steps_in_order(self) -> tuple[Step, ...]:
        return tuple(
            step for stage in self.stages for task in stage.tasks for step in task.steps
        )

    @cached_property
    def step_ids(self) -> frozenset[str]:
        return frozenset(step.id for step in self.steps_in_order)

    @cached_property
    def step_positions(self) -> dict[str, int]:
        """Document order of every step, for layout ordering checks."""
        return {step.id: i for i, step in enumerate(self.steps_in_order)}

    @cached_property
    def requirement_ids(self) -> frozenset[str]:
        return frozenset(req.id for req in self.requirements)

    @cached_property
    def requirements_by_step(self) -> dict[str, tuple[Requirement, ...]]:
        by_step: dict[str, list[Requirement]] = {step.id: [] for step in self.steps_in_order}
        for req in self.requirements:
            for sid in req.step_ids:
                by_step[sid].append(req)
        return {sid: tuple(reqs) for sid, reqs in by_step.items()}

    def counts(self) -> tuple[int, int, int, int]:
        """(stages, tasks, steps, requirements)."""
        n_tasks = sum(len(stage.tasks) for stage in self.stages)
        return (len(self.stages), n_tasks, len(self.steps_in_order), len(self.requirements))


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise IntegrityError(message)


def load_taxonomy(source_bytes: bytes) -> Taxonomy:
    """Parse and validate a taxonomy document.

    Raises ParseError for malformed JSON or wrong structural types, and
    IntegrityError for duplicate ids, dangling references, bad step id
    format, empty titles, or a mismatch against declared counts.
    """
    try:
        doc = json.loads(source_bytes)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("taxonomy document must be a JSON object")

    schema_version = doc.get("schema_version")
    if not isinstance(schema_version, str) or not schema_version:
        raise ParseError("schema_version must be a non-empty string")
    if not isinstance(doc.get("stages"), list):
        raise ParseError("stages must be a list")
    if not isinstance(doc.get("requirements"), list):
        raise ParseError("requirements must be a list")

    seen_ids: set[str] = set()

    def claim_id(raw: object, kind: str) -> str:
        key = str(raw)
        _require(key != "" and raw is not None, f"{kind} id must be non-empty")
        _require(key not in seen_ids, f"duplicate id {key!r} ({kind})")
        seen_ids.add(key)
        return key

    stages: list[Stage] = []
    for s_raw in doc["stages"]:
        if not isinstance(s_raw, dict):
            raise ParseError("each stage must be an object")
        stage_id = claim_id(s_raw.get("id"), "stage")
        title = s_raw.get("title", "")
        _require(isinstance(title, str) and title.strip() != "", f"stage {stage_id}: empty title")
        tasks: list[Task] = []
        for t_raw in s_raw.get("tasks", []):
            if not isinstance(t_raw, dict):
                raise ParseError("each task must be an object")
            task_raw_id = t_raw.get("id")
            if not isinstance(task_raw_id, int) or isinstance(task_raw_id, bool):
                raise ParseError(f"task id must be an integer, got {task_raw_id!r}")
            claim_id(task_raw_id, "task")
            t_title = t_raw.get("title", "")
            _require(
                isinstance(t_title, str) and t_title.strip() != "",
                f"task {task_raw_id}: empty title",
            )
            steps: list[Step] = []
            for p_raw in t_raw.get("steps", []):
                if not isinstance(p_raw, dict):
                    raise ParseError("each step must be an object")
                step_id = claim_id(p_raw.get("id"), "step")
                match = _STEP_ID_RE.match(step_id)
                _require(match is not None, f"step id {step_id!r} is not of the form T.N")
                assert match is not None
                _require(
                    int(match.group(1)) == task_raw_id,
                    f"step {step_id!r} does not belong to task {task_raw_id}",
                )
                p_title = p_raw.get("title", "")
                _require(
                    isinstance(p_title, str) and p_title.strip() != "",
                    f"step {step_id}: empty title",
                )
                steps.append(Step(step_id, p_title, str(p_raw.get("description", ""))))
            tasks.append(
                Task(task_raw_id, t_title, str(t_raw.get("description", "")), tuple(steps))
            )
        stages.append(Stage(stage_id, title, str(s_raw.get("description", "")), tuple(tasks)))

    all_step_ids = {step.id for stage in stages for task in stage.tasks for step in task.steps}

    requirements: list[Requirement] = []
    for r_raw in doc["requirements"]:
        if not isinstance(r_raw, dict):
            raise ParseError("each requirement must be an object")
        req_id = claim_id(r_raw.get("id"), "requirement")
        step_ids_raw = r_raw.get("step_ids")
        if not isinstance(step_ids_raw, list):
            raise ParseError(f"requirement {req_id}: step_ids must be a list")
        _require(len(step_ids_raw) > 0, f"requirement {req_id}: step_ids is empty")
        for sid in step_ids_raw:
            _require(
                sid in all_step_ids,
                f"requirement {req_id}: references nonexistent step {sid!r}",
            )
        requirements.append(
            Requirement(req_id, str(r_raw.get("statement", "")), tuple(step_ids_raw))
        )

    taxonomy = Taxonomy(schema_version, tuple(stages), tuple(requirements))

    declared = doc.get("counts")
    if isinstance(declared, dict):
        actual = taxonomy.counts()
        expected = (
            declared.get("stages"),
            declared.get("tasks"),
            declared.get("steps"),
            declared.get("requirements"),
        )
        _require(
            tuple(expected) == actual,
            f"declared counts {expected} do not match actual {actual}",
        )
    return taxonomy


def default_taxonomy_bytes() -> bytes:
    """Raw bytes of the taxonomy document bundled with the package."""
    return resources.files("swarmhub.data").joinpath("taxonomy.json").read_bytes()


def load_default_taxonomy() -> Taxonomy:
    return load_taxonomy(default_taxonomy_bytes())
