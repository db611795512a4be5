"""Workflow layouts: ordered step agents with prompts, tools, asset contracts.

A layout is configuration (JSON), validated against the deployment taxonomy
at load time. Several agents may implement the same taxonomy step when a
step is split for clarity; steps nobody can automate are modeled as manual
gates instead of being dropped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fnmatch import fnmatch

from ..core import ParseError, Taxonomy

AGENT_KINDS = ("automated", "manual_gate")


class LayoutError(ValueError):
    """The layout document violates a structural rule."""


@dataclass(frozen=True)
class AssetSpec:
    name: str
    media_type: str = "text/markdown"


@dataclass(frozen=True)
class AssetSelector:
    """Selects input assets by name pattern, optionally pinned to a producer.

    ``producer`` may be an earlier agent id, "seed"/"human" for assets
    supplied by people, or None to accept either origin.
    """

    name: str
    producer: str | None = None


@dataclass(frozen=True)
class StepAgent:
    agent_id: str
    step_id: str
    title: str
    kind: str = "automated"
    system_prompt: str = ""
    enabled_tools: tuple[tuple[str, str], ...] = ()
    inputs: tuple[AssetSelector, ...] = ()
    outputs: tuple[AssetSpec, ...] = ()

    @property
    def is_gate(self) -> bool:
        return self.kind == "manual_gate"


@dataclass(frozen=True)
class WorkflowLayout:
    layout_id: str
    title: str
    taxonomy_ref: str
    steps: tuple[StepAgent, ...]

    def agent_index(self, agent_id: str) -> int | None:
        for i, agent in enumerate(self.steps):
            if agent.agent_id == agent_id:
                return i
        return None

    def agent(self, agent_id: str) -> StepAgent | None:
        index = self.agent_index(agent_id)
        return None if index is None else self.steps[index]


def _parse_agent(raw: dict, index: int) -> StepAgent:
    where = f"steps[{index}]"
    if not isinstance(raw, dict):
        raise LayoutError(f"{where}: agent must be an object")
    tools = raw.get("enabled_tools", [])
    if not isinstance(tools, list):
        raise LayoutError(f"{where}: enabled_tools must be a list")
    enabled: list[tuple[str, str]] = []
    for t in tools:
        if isinstance(t, dict):
            enabled.append((str(t.get("tool_id", "")), str(t.get("function_name", ""))))
        elif isinstance(t, (list, tuple)) and len(t) == 2:
            enabled.append((str(t[0]), str(t[1])))
        else:
            raise LayoutError(f"{where}: each enabled tool needs tool_id and function_name")
    inputs = tuple(
        AssetSelector(str(sel.get("name", "")), sel.get("producer"))
        for sel in raw.get("inputs", [])
    )
    outputs = tuple(
        AssetSpec(str(spec.get("name", "")), str(spec.get("media_type", "text/markdown")))
        for spec in raw.get("outputs", [])
    )
    return StepAgent(
        agent_id=str(raw.get("agent_id", "")),
        step_id=str(raw.get("step_id", "")),
        title=str(raw.get("title", "")),
        kind=str(raw.get("kind", "automated")),
        system_prompt=str(raw.get("system_prompt", "")),
        enabled_tools=tuple(enabled),
        inputs=inputs,
        outputs=outputs,
    )


def load_layout(source: bytes | str | dict, taxonomy: Taxonomy) -> WorkflowLayout:
    """Parse and validate a layout document against the taxonomy."""
    if isinstance(source, dict):
        doc = source
    else:
        try:
            doc = json.loads(source)
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ParseError(f"layout is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise LayoutError("layout document must be a JSON object")

    layout_id = str(doc.get("layout_id", ""))
    if not layout_id:
        raise LayoutError("layout_id is required")
    steps_raw = doc.get("steps")
    if not isinstance(steps_raw, list) or not steps_raw:
        raise LayoutError("steps must be a non-empty list")

    agents = tuple(_parse_agent(raw, i) for i, raw in enumerate(steps_raw))
    layout = WorkflowLayout(
        layout_id=layout_id,
        title=str(doc.get("title", layout_id)),
        taxonomy_ref=str(doc.get("taxonomy_ref", "")),
        steps=agents,
    )
    _validate_layout(layout, taxonomy)
    return layout


def _validate_layout(layout: WorkflowLayout, taxonomy: Taxonomy) -> None:
    seen_agents: set[str] = set()
    seen_outputs: set[str] = set()
    last_position = -1

    for i, agent in enumerate(layout.steps):
        where = f"steps[{i}] ({agent.agent_id or '?'})"
        if not agent.agent_id:
            raise LayoutError(f"{where}: agent_id is required")
        if agent.agent_id in seen_agents:
            raise LayoutError(f"{where}: duplicate agent id")
        seen_agents.add(agent.agent_id)

        if agent.kind not in AGENT_KINDS:
            raise LayoutError(f"{where}: unknown kind {agent.kind!r}")
        if agent.step_id not in taxonomy.step_ids:
            raise LayoutError(f"{where}: step {agent.step_id!r} not in taxonomy")
        position = taxonomy.step_positions[agent.step_id]
        if position < last_position:
            raise LayoutError(
                f"{where}: step {agent.step_id} is out of taxonomy order"
            )
        last_position = position

        if agent.kind == "automated":
            if not agent.system_prompt.strip():
                raise LayoutError(f"{where}: automated agent needs a system prompt")
            if len(agent.outputs) != 1:
                raise LayoutError(
                    f"{where}: automated agent must declare exactly one output"
                )
        else:
            if agent.enabled_tools:
                raise LayoutError(f"{where}: manual gate cannot enable tools")
            if agent.system_prompt.strip():
                raise LayoutError(f"{where}: manual gate has no system prompt")

        for spec in agent.outputs:
            if not spec.name:
                raise LayoutError(f"{where}: output name is required")
            if spec.name in seen_outputs:
                raise LayoutError(f"{where}: output {spec.name!r} already produced "
                                  "by an earlier agent")
            seen_outputs.add(spec.name)

        for selector in agent.inputs:
            if not selector.name:
                raise LayoutError(f"{where}: input selector needs a name pattern")
            _check_selector(layout, taxonomy, i, selector, where)


def _check_selector(
    layout: WorkflowLayout,
    taxonomy: Taxonomy,
    agent_index: int,
    selector: AssetSelector,
    where: str,
) -> None:
    """Inputs must resolve to an earlier agent's output or to seed assets."""
    earlier = layout.steps[:agent_index]
    if selector.producer in ("seed", "human"):
        return  # satisfied at session creation from seed assets
    matching_agents = [
        agent
        for agent in earlier
        if any(fnmatch(spec.name, selector.name) for spec in agent.outputs)
    ]
    if selector.producer is None:
        return  # either an earlier output or a seed; checked at session creation
    if not any(agent.agent_id == selector.producer for agent in matching_agents):
        raise LayoutError(
            f"{where}: input {selector.name!r} expects producer "
            f"{selector.producer!r}, which is not an earlier agent producing it"
        )


def seed_required_selectors(layout: WorkflowLayout) -> list[tuple[StepAgent, AssetSelector]]:
    """Selectors that no earlier agent output can satisfy (must come from seeds)."""
    required = []
    for i, agent in enumerate(layout.steps):
        earlier_outputs = [
            spec.name for prior in layout.steps[:i] for spec in prior.outputs
        ]
        for selector in agent.inputs:
            if selector.producer in ("seed", "human"):
                required.append((agent, selector))
            elif selector.producer is None and not any(
                fnmatch(name, selector.name) for name in earlier_outputs
            ):
                required.append((agent, selector))
    return required


def layout_dict(layout: WorkflowLayout) -> dict:
    return {
        "layout_id": layout.layout_id,
        "title": layout.title,
        "taxonomy_ref": layout.taxonomy_ref,
        "steps": [
            {
                "agent_id": agent.agent_id,
                "step_id": agent.step_id,
                "title": agent.title,
                "kind": agent.kind,
                "system_prompt": agent.system_prompt,
                "enabled_tools": [
                    {"tool_id": tool_id, "function_name": fn}
                    for tool_id, fn in agent.enabled_tools
                ],
                "inputs": [
                    {"name": sel.name, **({"producer": sel.producer}
                                          if sel.producer is not None else {})}
                    for sel in agent.inputs
                ],
                "outputs": [
                    {"name": spec.name, "media_type": spec.media_type}
                    for spec in agent.outputs
                ],
            }
            for agent in layout.steps
        ],
    }
