"""Layout parsing and structural validation."""

from __future__ import annotations

import copy
import json

import pytest

from swarmhub.workflow import LayoutError, LayoutLibrary, layout_dict, load_layout

BASE_LAYOUT = {
    "layout_id": "test",
    "title": "Test layout",
    "taxonomy_ref": "swarmhub-default-1",
    "steps": [
        {
            "agent_id": "first",
            "step_id": "1.1",
            "title": "First",
            "kind": "automated",
            "system_prompt": "Do the first thing.",
            "enabled_tools": [],
            "inputs": [{"name": "seed.md", "producer": "seed"}],
            "outputs": [{"name": "one.md", "media_type": "text/markdown"}],
        },
        {
            "agent_id": "second",
            "step_id": "2.1",
            "title": "Second",
            "kind": "automated",
            "system_prompt": "Do the second thing.",
            "enabled_tools": [["org.example.ask", "search"]],
            "inputs": [{"name": "one.md", "producer": "first"}],
            "outputs": [{"name": "two.md", "media_type": "text/markdown"}],
        },
        {
            "agent_id": "check",
            "step_id": "2.5",
            "title": "Review",
            "kind": "manual_gate",
            "system_prompt": "",
            "enabled_tools": [],
            "inputs": [{"name": "two.md"}],
            "outputs": [],
        },
    ],
}


def variant(**edits):
    doc = copy.deepcopy(BASE_LAYOUT)
    doc.update(edits)
    return doc


def test_valid_layout_loads(default_taxonomy):
    layout = load_layout(json.dumps(BASE_LAYOUT).encode(), default_taxonomy)
    assert layout.layout_id == "test"
    assert [a.agent_id for a in layout.steps] == ["first", "second", "check"]
    assert layout.steps[1].enabled_tools == (("org.example.ask", "search"),)
    assert layout.steps[2].is_gate


def test_layout_round_trips_through_dict(default_taxonomy):
    layout = load_layout(json.dumps(BASE_LAYOUT).encode(), default_taxonomy)
    again = load_layout(layout_dict(layout), default_taxonomy)
    assert again == layout


def test_duplicate_agent_ids_rejected(default_taxonomy):
    doc = variant()
    doc["steps"][1]["agent_id"] = "first"
    with pytest.raises(LayoutError, match="duplicate agent id"):
        load_layout(doc, default_taxonomy)


def test_automated_agent_needs_prompt(default_taxonomy):
    doc = variant()
    doc["steps"][0]["system_prompt"] = "   "
    with pytest.raises(LayoutError, match="system prompt"):
        load_layout(doc, default_taxonomy)


def test_automated_agent_needs_exactly_one_output(default_taxonomy):
    doc = variant()
    doc["steps"][0]["outputs"] = []
    with pytest.raises(LayoutError, match="exactly one output"):
        load_layout(doc, default_taxonomy)


def test_gate_must_not_enable_tools(default_taxonomy):
    doc = variant()
    doc["steps"][2]["enabled_tools"] = [["org.example.ask", "search"]]
    with pytest.raises(LayoutError, match="gate cannot enable tools"):
        load_layout(doc, default_taxonomy)


def test_gate_has_no_system_prompt(default_taxonomy):
    doc = variant()
    doc["steps"][2]["system_prompt"] = "decide please"
    with pytest.raises(LayoutError, match="no system prompt"):
        load_layout(doc, default_taxonomy)


def test_unknown_step_rejected(default_taxonomy):
    doc = variant()
    doc["steps"][0]["step_id"] = "99.1"
    with pytest.raises(LayoutError, match="not in taxonomy"):
        load_layout(doc, default_taxonomy)


def test_step_order_must_follow_taxonomy(default_taxonomy):
    doc = variant()
    doc["steps"][0]["step_id"] = "2.2"  # now before 2.1
    with pytest.raises(LayoutError, match="out of taxonomy order"):
        load_layout(doc, default_taxonomy)


def test_two_agents_may_share_one_step(default_taxonomy):
    doc = variant()
    doc["steps"][0]["step_id"] = "2.1"  # same step as agent "second"
    layout = load_layout(doc, default_taxonomy)
    assert [a.step_id for a in layout.steps[:2]] == ["2.1", "2.1"]


def test_input_from_later_agent_rejected(default_taxonomy):
    doc = variant()
    doc["steps"][0]["inputs"] = [{"name": "two.md", "producer": "second"}]
    with pytest.raises(LayoutError, match="not an earlier agent"):
        load_layout(doc, default_taxonomy)


def test_duplicate_output_names_rejected(default_taxonomy):
    doc = variant()
    doc["steps"][1]["outputs"] = [{"name": "one.md"}]
    with pytest.raises(LayoutError, match="already produced"):
        load_layout(doc, default_taxonomy)


def test_unknown_kind_rejected(default_taxonomy):
    doc = variant()
    doc["steps"][0]["kind"] = "semi_automated"
    with pytest.raises(LayoutError, match="unknown kind"):
        load_layout(doc, default_taxonomy)


def test_bundled_stage1_layout_loads(default_taxonomy):
    library = LayoutLibrary(default_taxonomy)
    layout = library.get("stage1")
    automated = [a for a in layout.steps if not a.is_gate]
    gates = [a for a in layout.steps if a.is_gate]
    assert [a.step_id for a in automated] == ["1.1", "2.1", "2.2", "2.3", "2.4"]
    assert len(gates) == 1 and gates[0].step_id == "2.5"
    assert "stage1" in library.names()


def test_library_rejects_unknown_name(default_taxonomy):
    from swarmhub.workflow import UnknownLayout

    with pytest.raises(UnknownLayout):
        LayoutLibrary(default_taxonomy).get("no-such-layout")
