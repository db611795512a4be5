"""HTTP API: registry endpoints plus the workflow engine mounted beside them.

Reads are open; writes (submit, sources, harvest trigger) are guarded by a
single bearer token when one is configured. Errors use one wire shape:
``{"error": code, "detail": str, "violations": [...]}``.
"""

from __future__ import annotations

import base64
import binascii
import io
import json
import tempfile
import zipfile
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path

from fastapi import Depends, FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .core import (
    default_taxonomy_bytes,
    parse_manifest,
    rank_tools_for_step,
)
from .core.errors import ParseError
from .harvest import Harvester, HarvestInProgress, HarvestSource, ingest
from .store import CatalogueStore, StoreUnavailable
from .workflow import (
    GateDecision,
    InvalidRollbackTarget,
    MissingSeedAsset,
    NotAtGate,
    SeedAsset,
    SessionStateError,
    StaleAssetVersion,
    ToolCallBudgetExceeded,
    UnknownAsset,
    UnknownLayout,
    UnknownSession,
    UnresolvedTool,
    WorkflowEngine,
    WorkflowError,
    is_text_media_type,
)
from .bridge import BackendError

MAX_SUBMIT_BYTES = 1024 * 1024
DEFAULT_PAGE_LIMIT = 50
MAX_PAGE_LIMIT = 500


@dataclass
class AppConfig:
    data_dir: Path
    taxonomy_bytes: bytes | None = None
    write_token: str | None = None
    backend: object | None = None
    harvest_parallelism: int = 8
    layout_dir: Path | None = None


class ApiError(Exception):
    def __init__(self, status: int, code: str, detail: str, violations=None) -> None:
        self.status = status
        self.code = code
        self.detail = detail
        self.violations = violations or []


def error_response(status: int, code: str, detail: str, violations=None) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": code, "detail": detail, "violations": violations or []},
    )


class SourceBody(BaseModel):
    source_id: str
    kind: str
    location: str
    poll_interval: float = 300.0
    enabled: bool = True


class SeedAssetBody(BaseModel):
    name: str
    media_type: str = "text/markdown"
    content: str | None = None
    content_b64: str | None = None

    def to_seed(self) -> SeedAsset:
        if (self.content is None) == (self.content_b64 is None):
            raise ApiError(422, "bad_request",
                           f"seed {self.name!r} needs exactly one of content/content_b64")
        if self.content is not None:
            blob = self.content.encode("utf-8")
        else:
            try:
                blob = base64.b64decode(self.content_b64, validate=True)
            except (binascii.Error, ValueError) as exc:
                raise ApiError(422, "bad_request",
                               f"seed {self.name!r}: invalid base64: {exc}")
        return SeedAsset(self.name, blob, self.media_type)


class CreateSessionBody(BaseModel):
    layout_id: str
    session_id: str | None = None
    seed_assets: list[SeedAssetBody] = Field(default_factory=list)


class StepBody(BaseModel):
    user_message: str | None = None


class GateBody(BaseModel):
    approve: bool
    note: str = ""


class EditAssetBody(BaseModel):
    content: str | None = None
    content_b64: str | None = None
    expected_version: int | None = None


class RollbackBody(BaseModel):
    to_agent_id: str


def _entry_summary(entry, score: float | None = None) -> dict:
    annotation = entry.annotation
    doc = {
        "tool_id": annotation.tool_id,
        "name": annotation.name,
        "version": annotation.version,
        "description": annotation.description,
        "homepage": annotation.homepage,
        "license": annotation.license,
        "origin": entry.origin,
        "stale": entry.stale,
        "content_hash": entry.content_hash,
        "functions": [d.function_name for d in annotation.descriptors],
        "coverage_claims": len(annotation.coverage),
    }
    if score is not None:
        doc["score"] = score
    return doc


def _asset_view(asset) -> dict:
    versions = []
    for version in asset.versions:
        entry = {
            "version": version.version,
            "producer": list(version.producer) if isinstance(version.producer, tuple)
            else version.producer,
            "parent_version": version.parent_version,
            "created_at": version.created_at,
            "superseded": version.superseded,
        }
        if is_text_media_type(asset.media_type):
            entry["content"] = version.content.decode("utf-8", errors="replace")
        else:
            entry["content_b64"] = base64.b64encode(version.content).decode("ascii")
        versions.append(entry)
    return {
        "asset_id": asset.asset_id,
        "name": asset.name,
        "media_type": asset.media_type,
        "latest_version": asset.latest.version,
        "versions": versions,
    }


def _session_view(session) -> dict:
    return {
        "session_id": session.session_id,
        "status": session.status,
        "cursor": session.cursor,
        "created_at": session.created_at,
        "layout": {
            "layout_id": session.layout.layout_id,
            "title": session.layout.title,
            "taxonomy_ref": session.layout.taxonomy_ref,
            "steps": [
                {
                    "agent_id": a.agent_id,
                    "step_id": a.step_id,
                    "title": a.title,
                    "kind": a.kind,
                    "enabled_tools": [list(t) for t in a.enabled_tools],
                    "inputs": [{"name": s.name, "producer": s.producer} for s in a.inputs],
                    "outputs": [{"name": o.name, "media_type": o.media_type}
                                for o in a.outputs],
                }
                for a in session.layout.steps
            ],
        },
        "transcripts": {
            agent_id: [t.to_dict() for t in transcript.turns]
            for agent_id, transcript in sorted(session.transcripts.items())
        },
        "assets": {asset.name: _asset_view(asset) for asset in session.assets.all()},
    }


def create_app(config: AppConfig) -> FastAPI:
    data_dir = Path(config.data_dir)
    store = CatalogueStore(data_dir / "catalogue.db")
    if config.taxonomy_bytes is not None:
        store.set_taxonomy(config.taxonomy_bytes)
    elif not store.has_taxonomy:
        store.set_taxonomy(default_taxonomy_bytes())
    harvester = Harvester(store, parallelism=config.harvest_parallelism)
    engine = WorkflowEngine(
        store,
        data_dir / "sessions",
        layout_dir=config.layout_dir or data_dir / "layouts",
    )

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        store.close()

    app = FastAPI(title="swarmhub", version=__version__, lifespan=lifespan)
    # the web client may be served from a different origin than the API
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = store
    app.state.engine = engine
    app.state.harvester = harvester
    app.state.config = config

    @app.exception_handler(ApiError)
    async def handle_api_error(_request: Request, exc: ApiError):
        return error_response(exc.status, exc.code, exc.detail, exc.violations)

    @app.exception_handler(StoreUnavailable)
    async def handle_store_unavailable(_request: Request, exc: StoreUnavailable):
        return error_response(503, "store_unavailable", str(exc))

    def require_write_token(request: Request) -> None:
        token = config.write_token
        if not token:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {token}":
            raise ApiError(401, "unauthorized", "missing or invalid bearer token")

    def pagination(offset: int = 0, limit: int = DEFAULT_PAGE_LIMIT) -> tuple[int, int]:
        if offset < 0 or limit < 1:
            raise ApiError(422, "bad_request", "offset must be >= 0 and limit >= 1")
        return offset, min(limit, MAX_PAGE_LIMIT)

    # -- registry ---------------------------------------------------------

    @app.post("/api/v1/tools")
    async def submit_tool(request: Request, _auth: None = Depends(require_write_token)):
        body = await request.body()
        if len(body) > MAX_SUBMIT_BYTES:
            raise ApiError(413, "too_large",
                           f"manifest exceeds {MAX_SUBMIT_BYTES} bytes")
        record = ingest(body, "direct", store)
        if record.outcome == "invalid":
            if record.detail == "hash conflict":
                return error_response(
                    409, "hash_conflict",
                    "a different manifest is already stored for this (tool_id, version)",
                    record.violations.to_list(),
                )
            return error_response(
                422, "validation_failed", "manifest failed validation",
                record.violations.to_list() if record.violations else [],
            )
        annotation = parse_manifest(body)
        payload = {
            "tool_id": annotation.tool_id,
            "version": annotation.version,
            "content_hash": record.content_hash,
            "outcome": record.outcome,
        }
        status = 201 if record.outcome == "ingested" else 200
        return JSONResponse(status_code=status, content=payload)

    @app.get("/api/v1/tools")
    def query_tools(
        step_id: str | None = None,
        requirement_id: str | None = None,
        q: str | None = None,
        page: tuple[int, int] = Depends(pagination),
    ):
        offset, limit = page
        taxonomy = store.taxonomy
        entries = store.latest_entries()
        scores: dict[str, float] = {}

        if requirement_id is not None:
            if requirement_id not in taxonomy.requirement_ids:
                raise ApiError(404, "not_found",
                               f"unknown requirement id {requirement_id!r}")
            entries = [
                e for e in entries
                if any(c.requirement_id == requirement_id and c.level in ("partial", "full")
                       for c in e.annotation.coverage)
            ]
        if q:
            needle = q.lower()
            entries = [
                e for e in entries
                if needle in e.annotation.name.lower()
                or needle in e.annotation.description.lower()
            ]
        if step_id is not None:
            if step_id not in taxonomy.step_ids:
                raise ApiError(404, "not_found", f"unknown step id {step_id!r}")
            ranked = rank_tools_for_step(
                step_id, [e.annotation for e in entries], taxonomy
            )
            scores = dict(ranked)
            by_id = {e.annotation.tool_id: e for e in entries}
            entries = [by_id[tool_id] for tool_id, _score in ranked]
        else:
            entries = sorted(entries, key=lambda e: e.annotation.tool_id)

        items = [
            _entry_summary(e, scores.get(e.annotation.tool_id)) for e in entries
        ]
        return {
            "items": items[offset:offset + limit],
            "total": len(items),
            "offset": offset,
            "limit": limit,
        }

    @app.get("/api/v1/steps/{step_id}/tools")
    def tools_for_step(step_id: str, page: tuple[int, int] = Depends(pagination)):
        return query_tools(step_id=step_id, requirement_id=None, q=None, page=page)

    @app.get("/api/v1/tools/{tool_id}")
    def get_tool_latest(tool_id: str):
        entry = store.get_entry(tool_id)
        if entry is None:
            raise ApiError(404, "not_found", f"unknown tool {tool_id!r}")
        return _tool_detail(entry)

    @app.get("/api/v1/tools/{tool_id}/{version}")
    def get_tool_version(tool_id: str, version: str):
        entry = store.get_entry(tool_id, version)
        if entry is None:
            raise ApiError(404, "not_found", f"unknown tool {tool_id!r} @ {version!r}")
        return _tool_detail(entry)

    def _tool_detail(entry) -> dict:
        from .core import manifest_dict

        doc = manifest_dict(entry.annotation)
        doc["origin"] = entry.origin
        doc["content_hash"] = entry.content_hash
        doc["first_seen"] = entry.first_seen
        doc["last_seen"] = entry.last_seen
        doc["stale"] = entry.stale
        return doc

    @app.get("/api/v1/taxonomy")
    def get_taxonomy():
        return json.loads(store.taxonomy_bytes)

    @app.post("/api/v1/sources", status_code=201)
    def create_source(body: SourceBody, _auth: None = Depends(require_write_token)):
        try:
            source = HarvestSource(
                body.source_id, body.kind, body.location, body.poll_interval, body.enabled
            )
        except ValueError as exc:
            raise ApiError(422, "bad_request", str(exc))
        store.put_source(source)
        return source.to_dict()

    @app.get("/api/v1/sources")
    def list_sources():
        return {"items": [s.to_dict() for s in store.sources()]}

    @app.post("/api/v1/harvest")
    def trigger_harvest(_auth: None = Depends(require_write_token)):
        try:
            summary = harvester.reconcile()
        except HarvestInProgress as exc:
            raise ApiError(409, "harvest_in_progress", str(exc))
        return {"summary": summary}

    @app.get("/api/v1/health")
    def health():
        return {
            "status": "ok",
            "version": __version__,
            "tools": len(store.latest_entries()),
            "sessions": len(engine.sessions.list_ids()),
            "harvest_running": harvester.running,
        }

    # -- workflow engine -----------------------------------------------------

    @app.post("/api/v1/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        # layout files are addressable by path from the CLI, not over HTTP
        if "/" in body.layout_id or "\\" in body.layout_id or ".." in body.layout_id:
            raise ApiError(422, "bad_request", "layout_id must be a library name")
        seeds = [seed.to_seed() for seed in body.seed_assets]
        try:
            session = engine.create_session(
                body.layout_id, seeds, session_id=body.session_id
            )
        except UnknownLayout as exc:
            raise ApiError(404, "not_found", str(exc))
        except (UnresolvedTool, MissingSeedAsset, ParseError) as exc:
            raise ApiError(422, "bad_request", str(exc))
        except WorkflowError as exc:
            raise ApiError(409, "conflict", str(exc))
        return _session_view(session)

    def _load_session_or_404(session_id: str):
        try:
            return engine.load_session(session_id)
        except UnknownSession as exc:
            raise ApiError(404, "not_found", str(exc))

    @app.get("/api/v1/sessions/{session_id}")
    def get_session(session_id: str):
        return _session_view(_load_session_or_404(session_id))

    @app.post("/api/v1/sessions/{session_id}/step")
    def run_step(session_id: str, body: StepBody | None = None):
        backend = config.backend
        if backend is None:
            raise ApiError(503, "no_backend",
                           "no LLM backend is configured on this deployment")
        _load_session_or_404(session_id)
        message = body.user_message if body else None
        try:
            outcome = engine.run_step(session_id, message, backend=backend)
        except SessionStateError as exc:
            raise ApiError(409, "conflict", str(exc))
        except ToolCallBudgetExceeded as exc:
            raise ApiError(409, "tool_call_budget_exceeded", str(exc))
        except BackendError as exc:
            raise ApiError(502, "backend_error", str(exc))
        return {
            "agent_id": outcome.agent_id,
            "status": outcome.status,
            "produced_assets": [
                {"name": name, "version": version}
                for name, version in outcome.produced_assets
            ],
            "tool_calls": outcome.tool_calls,
            "transcript_delta": [t.to_dict() for t in outcome.transcript_delta],
            "session": _session_view(engine.load_session(session_id)),
        }

    @app.post("/api/v1/sessions/{session_id}/gate")
    def resolve_gate(session_id: str, body: GateBody):
        _load_session_or_404(session_id)
        try:
            session = engine.resolve_gate(
                session_id, GateDecision(approve=body.approve, note=body.note)
            )
        except NotAtGate as exc:
            raise ApiError(409, "not_at_gate", str(exc))
        except WorkflowError as exc:
            raise ApiError(422, "bad_request", str(exc))
        return _session_view(session)

    @app.put("/api/v1/sessions/{session_id}/assets/{asset_id}")
    def edit_asset(session_id: str, asset_id: str, body: EditAssetBody):
        _load_session_or_404(session_id)
        if (body.content is None) == (body.content_b64 is None):
            raise ApiError(422, "bad_request",
                           "exactly one of content/content_b64 is required")
        if body.content is not None:
            blob = body.content.encode("utf-8")
        else:
            try:
                blob = base64.b64decode(body.content_b64, validate=True)
            except (binascii.Error, ValueError) as exc:
                raise ApiError(422, "bad_request", f"invalid base64: {exc}")
        try:
            engine.edit_asset(
                session_id, asset_id, blob, expected_version=body.expected_version
            )
        except UnknownAsset as exc:
            raise ApiError(404, "not_found", str(exc))
        except StaleAssetVersion as exc:
            raise ApiError(409, "stale_version", str(exc))
        except SessionStateError as exc:
            raise ApiError(409, "conflict", str(exc))
        session = engine.load_session(session_id)
        return _asset_view(session.assets.get(asset_id))

    @app.post("/api/v1/sessions/{session_id}/rollback")
    def rollback(session_id: str, body: RollbackBody):
        _load_session_or_404(session_id)
        try:
            session = engine.rollback(session_id, body.to_agent_id)
        except InvalidRollbackTarget as exc:
            raise ApiError(409, "invalid_rollback", str(exc))
        return _session_view(session)

    @app.get("/api/v1/sessions/{session_id}/export")
    def export_session(session_id: str):
        _load_session_or_404(session_id)
        with tempfile.TemporaryDirectory() as tmp:
            root = engine.export_session(session_id, tmp)
            buffer = io.BytesIO()
            with zipfile.ZipFile(buffer, "w", zipfile.ZIP_DEFLATED) as archive:
                for path in sorted(root.rglob("*")):
                    if path.is_file():
                        info = zipfile.ZipInfo(
                            str(path.relative_to(root.parent)),
                            date_time=(1980, 1, 1, 0, 0, 0),
                        )
                        archive.writestr(info, path.read_bytes())
        return Response(
            content=buffer.getvalue(),
            media_type="application/zip",
            headers={
                "Content-Disposition":
                    f'attachment; filename="session-{session_id}.zip"'
            },
        )

    return app
