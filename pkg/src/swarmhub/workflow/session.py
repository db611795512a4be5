"""Workflow sessions and their on-disk persistence.

A session freezes its layout and resolved tool descriptors at creation so
later registry changes cannot alter a running workflow. Every mutation is
persisted atomically; reloading after a crash reproduces status, cursor,
transcript, and assets exactly.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from ..bridge import ChatTurn
from ..core import ToolDescriptor, descriptor_dict, descriptor_from_dict
from ..util import atomic_write_bytes
from .assets import AssetStore
from .model import StepAgent, WorkflowLayout, layout_dict, load_layout

SESSION_STATUSES = ("created", "running", "waiting_gate", "completed", "failed")

_SESSION_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


class UnknownSession(KeyError):
    def __init__(self, session_id: str) -> None:
        super().__init__(session_id)
        self.session_id = session_id

    def __str__(self) -> str:
        return f"unknown session: {self.session_id!r}"


@dataclass(frozen=True)
class ResolvedTool:
    """A tool function pinned at session creation time."""

    tool_id: str
    tool_version: str
    function_name: str
    descriptor: ToolDescriptor

    def to_dict(self) -> dict:
        return {
            "tool_id": self.tool_id,
            "tool_version": self.tool_version,
            "function_name": self.function_name,
            "descriptor": descriptor_dict(self.descriptor),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ResolvedTool":
        return cls(
            tool_id=raw["tool_id"],
            tool_version=raw["tool_version"],
            function_name=raw["function_name"],
            descriptor=descriptor_from_dict(raw["descriptor"]),
        )


@dataclass
class AgentTranscript:
    turns: list[ChatTurn] = field(default_factory=list)
    superseded: list[ChatTurn] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "turns": [t.to_dict() for t in self.turns],
            "superseded": [t.to_dict() for t in self.superseded],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "AgentTranscript":
        return cls(
            turns=[ChatTurn.from_dict(t) for t in raw.get("turns", [])],
            superseded=[ChatTurn.from_dict(t) for t in raw.get("superseded", [])],
        )


@dataclass
class WorkflowSession:
    session_id: str
    layout: WorkflowLayout
    resolved_tools: dict[str, ResolvedTool]
    status: str = "created"
    cursor: int = 0
    transcripts: dict[str, AgentTranscript] = field(default_factory=dict)
    assets: AssetStore = field(default_factory=AssetStore)
    created_at: str = ""

    def current_agent(self) -> StepAgent | None:
        if self.cursor >= len(self.layout.steps):
            return None
        return self.layout.steps[self.cursor]

    def transcript_for(self, agent_id: str) -> AgentTranscript:
        return self.transcripts.setdefault(agent_id, AgentTranscript())

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "created_at": self.created_at,
            "status": self.status,
            "cursor": self.cursor,
            "layout": layout_dict(self.layout),
            "resolved_tools": {
                name: tool.to_dict() for name, tool in sorted(self.resolved_tools.items())
            },
            "transcripts": {
                agent_id: transcript.to_dict()
                for agent_id, transcript in sorted(self.transcripts.items())
            },
            "assets": self.assets.to_dict(),
        }

    @classmethod
    def from_dict(cls, raw: dict, taxonomy) -> "WorkflowSession":
        return cls(
            session_id=raw["session_id"],
            layout=load_layout(raw["layout"], taxonomy),
            resolved_tools={
                name: ResolvedTool.from_dict(t)
                for name, t in raw.get("resolved_tools", {}).items()
            },
            status=raw["status"],
            cursor=raw["cursor"],
            transcripts={
                agent_id: AgentTranscript.from_dict(t)
                for agent_id, t in raw.get("transcripts", {}).items()
            },
            assets=AssetStore.from_dict(raw.get("assets", {})),
            created_at=raw.get("created_at", ""),
        )


def valid_session_id(session_id: str) -> bool:
    return bool(_SESSION_ID_RE.match(session_id)) and len(session_id) <= 80


class SessionStore:
    """One directory per session under ``root``, with atomic JSON writes."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, session_id: str) -> Path:
        if not valid_session_id(session_id):
            raise UnknownSession(session_id)
        return self.root / session_id / "session.json"

    def exists(self, session_id: str) -> bool:
        try:
            return self._path(session_id).exists()
        except UnknownSession:
            return False

    def save(self, session: WorkflowSession) -> None:
        payload = json.dumps(session.to_dict(), indent=1, ensure_ascii=False,
                             sort_keys=True)
        atomic_write_bytes(self._path(session.session_id), payload.encode("utf-8"))

    def load(self, session_id: str, taxonomy) -> WorkflowSession:
        path = self._path(session_id)
        if not path.exists():
            raise UnknownSession(session_id)
        raw = json.loads(path.read_text(encoding="utf-8"))
        return WorkflowSession.from_dict(raw, taxonomy)

    def list_ids(self) -> list[str]:
        if not self.root.exists():
            return []
        return sorted(
            p.parent.name for p in self.root.glob("*/session.json")
        )
