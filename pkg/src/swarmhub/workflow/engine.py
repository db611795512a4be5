"""Workflow execution: conversation loop, gates, edits, rollback, export.

Each automated agent runs a fresh conversation (assets are the only state
carried across agents). Every turn and asset version is persisted before
run_step returns, so a killed process resumes by re-running the current
agent from its start.
"""

from __future__ import annotations

import json
import threading
import uuid
from contextlib import contextmanager
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..bridge import (
    ArgumentError,
    BackendError,
    BackendRequest,
    ChatTurn,
    Timeout,
    ToolCall,
    TransportError,
    complete,
    invoke,
    to_function_schema,
)
from ..core import ParseError, Taxonomy
from ..store import CatalogueStore
from ..util import atomic_write_bytes, utc_now_iso
from .assets import Asset, is_text_media_type
from .model import (
    AssetSelector,
    StepAgent,
    WorkflowLayout,
    load_layout,
    seed_required_selectors,
)
from .session import (
    AgentTranscript,
    ResolvedTool,
    SessionStore,
    WorkflowSession,
    valid_session_id,
)

DEFAULT_MAX_TOOL_CALLS = 16

_EXTENSIONS = {
    "text/markdown": "md",
    "text/plain": "txt",
    "text/csv": "csv",
    "application/json": "json",
    "application/xml": "xml",
}


class WorkflowError(RuntimeError):
    pass


class UnknownLayout(WorkflowError):
    pass


class UnresolvedTool(WorkflowError):
    def __init__(self, missing: list[tuple[str, str]]) -> None:
        names = ", ".join(f"{tool_id}.{fn}" for tool_id, fn in missing)
        super().__init__(f"tools not resolvable in the registry: {names}")
        self.missing = missing


class MissingSeedAsset(WorkflowError):
    pass


class NotAtGate(WorkflowError):
    pass


class UnknownAsset(WorkflowError):
    pass


class InvalidRollbackTarget(WorkflowError):
    pass


class ToolCallBudgetExceeded(WorkflowError):
    pass


class SessionStateError(WorkflowError):
    pass


class StaleAssetVersion(WorkflowError):
    """Optimistic-concurrency failure: the asset moved past expected_version."""


@dataclass(frozen=True)
class SeedAsset:
    name: str
    content: bytes
    media_type: str = "text/markdown"


@dataclass
class StepOutcome:
    produced_assets: list[tuple[str, int]]
    transcript_delta: list[ChatTurn]
    status: str
    agent_id: str
    tool_calls: int = 0


@dataclass(frozen=True)
class GateDecision:
    approve: bool
    note: str = ""


class LayoutLibrary:
    """Named layouts from the bundled package data plus a deployment directory."""

    def __init__(self, taxonomy: Taxonomy, extra_dir: str | Path | None = None) -> None:
        self.taxonomy = taxonomy
        self.extra_dir = Path(extra_dir) if extra_dir else None

    def _candidate_bytes(self, layout_id: str) -> bytes | None:
        if self.extra_dir is not None:
            path = self.extra_dir / f"{layout_id}.json"
            if path.exists():
                return path.read_bytes()
        bundled = resources.files("swarmhub.data.layouts").joinpath(f"{layout_id}.json")
        try:
            return bundled.read_bytes()
        except FileNotFoundError:
            return None

    def get(self, layout_id: str) -> WorkflowLayout:
        # Accept a direct path to a layout document as well as a library name.
        as_path = Path(layout_id)
        if as_path.suffix == ".json" and as_path.exists():
            return load_layout(as_path.read_bytes(), self.taxonomy)
        blob = self._candidate_bytes(layout_id)
        if blob is None:
            raise UnknownLayout(f"no layout named {layout_id!r}")
        return load_layout(blob, self.taxonomy)

    def names(self) -> list[str]:
        names = set()
        for entry in resources.files("swarmhub.data.layouts").iterdir():
            if entry.name.endswith(".json"):
                names.add(entry.name[:-5])
        if self.extra_dir is not None and self.extra_dir.exists():
            names.update(p.stem for p in self.extra_dir.glob("*.json"))
        return sorted(names)


class WorkflowEngine:
    """Runs sessions against a catalogue store; one writer per session."""

    def __init__(
        self,
        store: CatalogueStore,
        sessions_root: str | Path,
        *,
        layout_dir: str | Path | None = None,
        max_tool_calls: int = DEFAULT_MAX_TOOL_CALLS,
    ) -> None:
        self.store = store
        self.sessions = SessionStore(sessions_root)
        self.layouts = LayoutLibrary(store.taxonomy, layout_dir)
        self.max_tool_calls = max_tool_calls
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    @contextmanager
    def _session_lock(self, session_id: str):
        with self._locks_guard:
            lock = self._locks.setdefault(session_id, threading.Lock())
        with lock:
            yield

    def load_session(self, session_id: str) -> WorkflowSession:
        return self.sessions.load(session_id, self.store.taxonomy)

    # -- create -------------------------------------------------------------

    def create_session(
        self,
        layout_id: str,
        seed_assets: list[SeedAsset],
        *,
        session_id: str | None = None,
    ) -> WorkflowSession:
        layout = self.layouts.get(layout_id)
        resolved = self._resolve_tools(layout)

        session_id = session_id or f"s-{uuid.uuid4().hex[:12]}"
        if not valid_session_id(session_id):
            raise WorkflowError(f"invalid session id {session_id!r}")
        if self.sessions.exists(session_id):
            raise WorkflowError(f"session {session_id!r} already exists")

        now = utc_now_iso()
        session = WorkflowSession(
            session_id=session_id,
            layout=layout,
            resolved_tools=resolved,
            status="created",
            cursor=0,
            created_at=now,
        )
        for seed in seed_assets:
            session.assets.put_version(
                seed.name, seed.content, "human", now, media_type=seed.media_type
            )
        self._check_seeds(layout, session)
        if layout.steps[0].is_gate:
            session.status = "waiting_gate"
        self.sessions.save(session)
        return session

    def _resolve_tools(self, layout: WorkflowLayout) -> dict[str, ResolvedTool]:
        resolved: dict[str, ResolvedTool] = {}
        missing: list[tuple[str, str]] = []
        for agent in layout.steps:
            for tool_id, function_name in agent.enabled_tools:
                mangled = f"{tool_id}__{function_name}"
                if mangled in resolved:
                    continue
                entry = self.store.get_entry(tool_id)
                descriptor = None if entry is None else entry.annotation.descriptor(
                    function_name
                )
                if descriptor is None:
                    missing.append((tool_id, function_name))
                    continue
                resolved[mangled] = ResolvedTool(
                    tool_id=tool_id,
                    tool_version=entry.annotation.version,
                    function_name=function_name,
                    descriptor=descriptor,
                )
        if missing:
            raise UnresolvedTool(missing)
        return resolved

    def _check_seeds(self, layout: WorkflowLayout, session: WorkflowSession) -> None:
        for agent, selector in seed_required_selectors(layout):
            if not session.assets.match(selector.name):
                raise MissingSeedAsset(
                    f"agent {agent.agent_id!r} needs a seed asset matching "
                    f"{selector.name!r}"
                )

    # -- run ------------------------------------------------------------------

    def run_step(
        self,
        session_id: str,
        user_message: str | None = None,
        *,
        backend,
    ) -> StepOutcome:
        with self._session_lock(session_id):
            session = self.load_session(session_id)
            return self._run_step_locked(session, user_message, backend)

    def _run_step_locked(self, session, user_message, backend) -> StepOutcome:
        if session.status in ("waiting_gate", "completed"):
            raise SessionStateError(
                f"session is {session.status}; run_step needs an automated agent"
            )
        agent = session.current_agent()
        assert agent is not None
        if agent.is_gate:
            raise SessionStateError("current agent is a manual gate; resolve it instead")

        # Fresh attempt: discard working turns from a crashed or failed try so
        # a resumed run reproduces the uninterrupted transcript exactly.
        transcript = session.transcript_for(agent.agent_id)
        transcript.turns = []
        session.status = "running"

        def record(turn: ChatTurn) -> None:
            transcript.turns.append(turn)
            self.sessions.save(session)

        record(ChatTurn("system", agent.system_prompt, timestamp=utc_now_iso()))
        user_parts = []
        rendered = self._render_inputs(session, agent)
        if rendered:
            user_parts.append(rendered)
        if user_message:
            user_parts.append(user_message)
        if user_parts:
            record(ChatTurn("user", "\n\n".join(user_parts), timestamp=utc_now_iso()))

        schemas = tuple(
            to_function_schema(tool.tool_id, tool.descriptor)
            for name, tool in sorted(session.resolved_tools.items())
            if (tool.tool_id, tool.function_name) in agent.enabled_tools
        )

        tool_calls_done = 0
        while True:
            request = BackendRequest(turns=tuple(transcript.turns), functions=schemas)
            try:
                response = complete(request, backend)
            except BackendError:
                session.status = "failed"
                self.sessions.save(session)
                raise

            if response.tool_call is not None:
                if tool_calls_done >= self.max_tool_calls:
                    session.status = "failed"
                    self.sessions.save(session)
                    raise ToolCallBudgetExceeded(
                        f"agent {agent.agent_id!r} exceeded {self.max_tool_calls} "
                        "tool calls in one step"
                    )
                resolved = session.resolved_tools[response.tool_call.name]
                call = ToolCall(
                    resolved.tool_id, resolved.function_name, response.tool_call.arguments
                )
                record(ChatTurn("assistant", "", tool_call=call, timestamp=utc_now_iso()))
                content = self._dispatch(resolved, response.tool_call.arguments)
                record(ChatTurn("tool_result", content, tool_call=call,
                                timestamp=utc_now_iso()))
                tool_calls_done += 1
                continue

            final_text = response.final_text or ""
            record(ChatTurn("assistant", final_text, timestamp=utc_now_iso()))
            spec = agent.outputs[0]
            asset = session.assets.put_version(
                spec.name,
                final_text.encode("utf-8"),
                agent.agent_id,
                utc_now_iso(),
                media_type=spec.media_type,
            )
            session.cursor += 1
            session.status = self._status_after_advance(session)
            self.sessions.save(session)
            return StepOutcome(
                produced_assets=[(asset.name, asset.latest.version)],
                transcript_delta=list(transcript.turns),
                status=session.status,
                agent_id=agent.agent_id,
                tool_calls=tool_calls_done,
            )

    def _dispatch(self, resolved: ResolvedTool, arguments: dict) -> str:
        """Execute one tool call; failures become data for the model."""
        try:
            result = invoke(resolved.descriptor, arguments, tool_id=resolved.tool_id)
        except (ArgumentError, Timeout, TransportError) as exc:
            return f"TOOL ERROR ({type(exc).__name__})\n{exc}"
        return result.as_text()

    def _status_after_advance(self, session: WorkflowSession) -> str:
        agent = session.current_agent()
        if agent is None:
            return "completed"
        return "waiting_gate" if agent.is_gate else "running"

    def _render_inputs(self, session: WorkflowSession, agent: StepAgent) -> str:
        blocks: list[str] = []
        seen: set[str] = set()
        for selector in agent.inputs:
            for asset in self._resolve_selector(session, selector):
                if asset.name in seen:
                    continue
                seen.add(asset.name)
                blocks.append(self._render_asset(asset))
        return "\n\n".join(blocks)

    def _resolve_selector(self, session: WorkflowSession, selector: AssetSelector):
        matched = session.assets.match(selector.name)
        if selector.producer in ("seed", "human"):
            return [a for a in matched if a.root_producer == "human"]
        if selector.producer is not None:
            return [a for a in matched if a.root_producer == selector.producer]
        return matched

    def _render_asset(self, asset: Asset) -> str:
        version = asset.latest
        header = f'--- asset "{asset.name}" ({asset.media_type}) v{version.version}'
        if is_text_media_type(asset.media_type):
            text = version.content.decode("utf-8", errors="replace")
            return f"{header} ---\n{text}\n--- end asset ---"
        return f"{header}: {len(version.content)} bytes, not inlined ---"

    # -- gates ----------------------------------------------------------------

    def resolve_gate(self, session_id: str, decision: GateDecision) -> WorkflowSession:
        with self._session_lock(session_id):
            session = self.load_session(session_id)
            agent = session.current_agent()
            if agent is None or not agent.is_gate:
                raise NotAtGate("current agent is not a manual gate")
            if session.status not in ("waiting_gate", "running", "created"):
                raise NotAtGate(f"session is {session.status}")

            transcript = session.transcript_for(agent.agent_id)
            now = utc_now_iso()
            if decision.approve:
                transcript.turns.append(ChatTurn("user", "Gate approved.", timestamp=now))
                session.cursor += 1
                session.status = self._status_after_advance(session)
            else:
                if not decision.note.strip():
                    raise WorkflowError("gate rejection requires a note")
                transcript.turns.append(
                    ChatTurn("user", f"Gate rejected: {decision.note}", timestamp=now)
                )
                session.assets.put_version(
                    f"{agent.agent_id}-note.md",
                    decision.note.encode("utf-8"),
                    "human",
                    now,
                    media_type="text/markdown",
                )
                session.status = "running"
            self.sessions.save(session)
            return session

    # -- assets -----------------------------------------------------------------

    def edit_asset(
        self,
        session_id: str,
        asset_id: str,
        new_content: bytes,
        *,
        expected_version: int | None = None,
    ) -> Asset:
        with self._session_lock(session_id):
            session = self.load_session(session_id)
            if session.status == "failed":
                raise SessionStateError("cannot edit assets of a failed session")
            asset = session.assets.get(asset_id)
            if asset is None:
                raise UnknownAsset(f"no asset {asset_id!r} in session")
            if expected_version is not None and asset.latest.version != expected_version:
                raise StaleAssetVersion(
                    f"asset {asset_id!r} is at version {asset.latest.version}, "
                    f"expected {expected_version}"
                )
            session.assets.put_version(
                asset.name, new_content, "human", utc_now_iso(),
                media_type=asset.media_type,
            )
            self.sessions.save(session)
            return asset

    # -- rollback -----------------------------------------------------------------

    def rollback(self, session_id: str, to_agent_id: str) -> WorkflowSession:
        with self._session_lock(session_id):
            session = self.load_session(session_id)
            target = session.layout.agent_index(to_agent_id)
            if target is None:
                raise InvalidRollbackTarget(f"no agent {to_agent_id!r} in layout")
            if target >= session.cursor:
                raise InvalidRollbackTarget(
                    f"rollback target {to_agent_id!r} is not strictly before the cursor"
                )
            affected = {a.agent_id for a in session.layout.steps[target:]}
            for agent_id in affected:
                transcript = session.transcript_for(agent_id)
                transcript.superseded.extend(transcript.turns)
                transcript.turns = []
            for asset in session.assets.all():
                if asset.root_producer in affected:
                    session.assets.supersede_all_versions(asset.asset_id)
            session.cursor = target
            session.status = (
                "waiting_gate" if session.layout.steps[target].is_gate else "running"
            )
            self.sessions.save(session)
            return session

    # -- export -----------------------------------------------------------------

    def export_session(self, session_id: str, out_dir: str | Path) -> Path:
        session = self.load_session(session_id)
        root = Path(out_dir) / f"session-{session.session_id}"
        asset_index: dict = {}
        for asset in session.assets.all():
            versions = []
            for version in asset.versions:
                filename = _asset_filename(asset, version.version)
                atomic_write_bytes(root / "assets" / filename, version.content)
                versions.append(
                    {
                        "version": version.version,
                        "producer": list(version.producer)
                        if isinstance(version.producer, tuple) else version.producer,
                        "parent_version": version.parent_version,
                        "created_at": version.created_at,
                        "superseded": version.superseded,
                        "file": f"assets/{filename}",
                    }
                )
            asset_index[asset.name] = {
                "asset_id": asset.asset_id,
                "media_type": asset.media_type,
                "versions": versions,
            }

        for agent in session.layout.steps:
            transcript = session.transcripts.get(agent.agent_id, AgentTranscript())
            payload = {
                "agent_id": agent.agent_id,
                "step_id": agent.step_id,
                "turns": [t.to_dict() for t in transcript.turns],
                "superseded_turns": [t.to_dict() for t in transcript.superseded],
            }
            atomic_write_bytes(
                root / "transcript" / f"{agent.agent_id}.json",
                _json_bytes(payload),
            )

        manifest = {
            "session_id": session.session_id,
            "created_at": session.created_at,
            "status": session.status,
            "cursor": session.cursor,
            "layout_id": session.layout.layout_id,
            "layout_title": session.layout.title,
            "taxonomy_ref": session.layout.taxonomy_ref,
            "agents": [
                {
                    "agent_id": a.agent_id,
                    "step_id": a.step_id,
                    "kind": a.kind,
                    "title": a.title,
                }
                for a in session.layout.steps
            ],
            "assets": asset_index,
        }
        atomic_write_bytes(root / "manifest.json", _json_bytes(manifest))
        return root


def _json_bytes(payload: dict) -> bytes:
    return (json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True) + "\n").encode(
        "utf-8"
    )


def _asset_filename(asset: Asset, version: int) -> str:
    ext = _EXTENSIONS.get(asset.media_type, "bin")
    base = asset.name
    if base.endswith(f".{ext}"):
        base = base[: -(len(ext) + 1)]
    return f"{base}.v{version}.{ext}"


def load_seed_dir(seed_dir: str | Path) -> list[SeedAsset]:
    """Each regular file in the directory becomes one seed asset."""
    seeds = []
    seed_path = Path(seed_dir)
    if not seed_path.is_dir():
        raise ParseError(f"seed directory {seed_dir} does not exist")
    media_by_ext = {f".{ext}": media for media, ext in _EXTENSIONS.items()}
    for path in sorted(seed_path.iterdir()):
        if not path.is_file():
            continue
        media_type = media_by_ext.get(path.suffix.lower(), "application/octet-stream")
        seeds.append(SeedAsset(path.name, path.read_bytes(), media_type))
    return seeds
