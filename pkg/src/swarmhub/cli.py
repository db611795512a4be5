"""Operator command line: serve, validate, harvest, and headless workflow runs.

Exit codes are stable contracts: 0 success, 1 validation failure, 2 I/O or
configuration failure, 3 backend failure, 4 blocked at a manual gate.
"""

from __future__ import annotations

import json
import os
import signal
import sys
from pathlib import Path

import click

from . import __version__
from .bridge import BackendError, HttpLlmBackend, ScriptedBackend
from .core import (
    ParseError,
    default_taxonomy_bytes,
    load_taxonomy,
    parse_manifest,
    validate_annotation,
)
from .core.errors import IntegrityError
from .harvest import Harvester
from .store import CatalogueStore, StoreUnavailable
from .workflow import (
    GateDecision,
    MissingSeedAsset,
    ToolCallBudgetExceeded,
    UnknownLayout,
    UnresolvedTool,
    WorkflowEngine,
    WorkflowError,
    load_seed_dir,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_BACKEND = 3
EXIT_GATE_BLOCKED = 4


def _echo_json(payload) -> None:
    click.echo(json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True))


def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        click.echo(f"cannot read {path}: {exc}", err=True)
        sys.exit(EXIT_IO)


def _taxonomy_bytes(taxonomy_path: str | None) -> bytes:
    if taxonomy_path is None:
        return default_taxonomy_bytes()
    return _read_bytes(taxonomy_path)


def _open_store(data_dir: str, taxonomy_path: str | None) -> CatalogueStore:
    try:
        store = CatalogueStore(Path(data_dir) / "catalogue.db")
        if taxonomy_path is not None or not store.has_taxonomy:
            store.set_taxonomy(_taxonomy_bytes(taxonomy_path))
        return store
    except (StoreUnavailable, ParseError, IntegrityError) as exc:
        click.echo(f"cannot open data dir {data_dir}: {exc}", err=True)
        sys.exit(EXIT_IO)


def _build_backend(backend: str, fixture: str | None):
    if backend == "scripted":
        if not fixture:
            click.echo("--backend scripted requires --fixture <file>", err=True)
            sys.exit(EXIT_IO)
        try:
            return ScriptedBackend.from_file(fixture)
        except (OSError, ValueError) as exc:
            click.echo(f"cannot load scripted fixture: {exc}", err=True)
            sys.exit(EXIT_IO)
    try:
        return HttpLlmBackend.from_env()
    except BackendError as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_IO)


data_dir_option = click.option(
    "--data-dir",
    envvar="SWARM_DATA_DIR",
    default="./swarm-data",
    show_default=True,
    help="Directory holding the catalogue, sessions, and layouts.",
)
json_option = click.option("--json", "as_json", is_flag=True,
                           help="Machine-readable output.")


@click.group()
@click.version_option(version=__version__, prog_name="swarmhub")
def main() -> None:
    """Research-tool registry and workflow runner."""


@main.command()
@click.argument("manifest_path", type=click.Path())
@click.option("--taxonomy", "taxonomy_path", type=click.Path(),
              help="Taxonomy document to validate against (default: bundled).")
@json_option
def validate(manifest_path: str, taxonomy_path: str | None, as_json: bool) -> None:
    """Validate a tool manifest; exit 0 only when it is error-free."""
    taxonomy = load_taxonomy(_taxonomy_bytes(taxonomy_path))
    blob = _read_bytes(manifest_path)
    try:
        annotation = parse_manifest(blob)
    except ParseError as exc:
        if as_json:
            _echo_json({"ok": False, "violations": [
                {"path": "", "severity": "error", "message": str(exc)}]})
        else:
            click.echo(f"error: {exc}")
        sys.exit(EXIT_VALIDATION)

    report = validate_annotation(annotation, taxonomy)
    if as_json:
        _echo_json({"ok": report.ok, "tool_id": annotation.tool_id,
                    "version": annotation.version,
                    "content_hash": annotation.content_hash,
                    "violations": report.to_list()})
    else:
        for violation in report.violations:
            click.echo(f"{violation.severity}: {violation.path}: {violation.message}")
        verdict = "valid" if report.ok else "invalid"
        click.echo(f"{annotation.tool_id} {annotation.version}: {verdict} "
                   f"({len(report.errors)} errors, {len(report.warnings)} warnings)")
    sys.exit(EXIT_OK if report.ok else EXIT_VALIDATION)


@main.command("taxonomy-check")
@click.argument("taxonomy_path", type=click.Path())
@json_option
def taxonomy_check(taxonomy_path: str, as_json: bool) -> None:
    """Check a taxonomy document and report its counts."""
    blob = _read_bytes(taxonomy_path)
    try:
        taxonomy = load_taxonomy(blob)
    except (ParseError, IntegrityError) as exc:
        if as_json:
            _echo_json({"ok": False, "error": str(exc)})
        else:
            click.echo(f"invalid taxonomy: {exc}")
        sys.exit(EXIT_VALIDATION)
    stages, tasks, steps, requirements = taxonomy.counts()
    if as_json:
        _echo_json({"ok": True, "schema_version": taxonomy.schema_version,
                    "stages": stages, "tasks": tasks, "steps": steps,
                    "requirements": requirements})
    else:
        click.echo(f"{taxonomy.schema_version}: {stages} stages, {tasks} tasks, "
                   f"{steps} steps, {requirements} requirements")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--once", is_flag=True, help="Run a single reconcile round and exit.")
@click.option("--parallelism", default=8, show_default=True,
              help="Concurrent source fetches.")
@data_dir_option
@click.option("--taxonomy", "taxonomy_path", type=click.Path())
@json_option
def harvest(once: bool, parallelism: int, data_dir: str, taxonomy_path: str | None,
            as_json: bool) -> None:
    """Harvest all configured sources into the catalogue."""
    store = _open_store(data_dir, taxonomy_path)
    harvester = Harvester(store, parallelism=parallelism)

    def one_round() -> dict:
        summary = harvester.reconcile()
        if as_json:
            _echo_json({"summary": summary})
        else:
            click.echo(", ".join(f"{k}={v}" for k, v in sorted(summary.items())))
        return summary

    try:
        if once:
            one_round()
            return
        import time

        intervals = [s.poll_interval for s in store.sources() if s.enabled]
        pause = min(intervals) if intervals else 300.0
        while True:
            one_round()
            time.sleep(pause)
    except StoreUnavailable as exc:
        click.echo(f"store unavailable: {exc}", err=True)
        sys.exit(EXIT_IO)
    finally:
        store.close()


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8800, show_default=True)
@data_dir_option
@click.option("--taxonomy", "taxonomy_path", type=click.Path())
@click.option("--write-token", envvar="SWARM_WRITE_TOKEN", default=None,
              help="Bearer token required for write endpoints.")
@click.option("--backend", type=click.Choice(["scripted", "http", "none"]),
              default="none", show_default=True,
              help="LLM backend for running workflow steps over the API.")
@click.option("--fixture", type=click.Path(), default=None,
              help="Scripted backend fixture file.")
def serve(host: str, port: int, data_dir: str, taxonomy_path: str | None,
          write_token: str | None, backend: str, fixture: str | None) -> None:
    """Serve the registry and workflow APIs."""
    import uvicorn

    from .api import AppConfig, create_app

    backend_impl = None if backend == "none" else _build_backend(backend, fixture)
    taxonomy_bytes = _taxonomy_bytes(taxonomy_path) if taxonomy_path else None
    app = create_app(AppConfig(
        data_dir=Path(data_dir),
        taxonomy_bytes=taxonomy_bytes,
        write_token=write_token,
        backend=backend_impl,
    ))
    click.echo(f"serving on http://{host}:{port} (data: {data_dir})")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command("workflow-run")
@click.option("--layout", required=True, help="Layout name or path to a layout file.")
@click.option("--seed", "seed_dir", required=True, type=click.Path(),
              help="Directory of seed asset files.")
@click.option("--backend", type=click.Choice(["scripted", "http"]), required=True)
@click.option("--fixture", type=click.Path(), default=None,
              help="Scripted backend fixture file.")
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Directory receiving the session export.")
@click.option("--session-id", default=None,
              help="Create with this id, or resume it if it already exists.")
@click.option("--auto-approve-gates", is_flag=True,
              help="Approve manual gates instead of stopping.")
@data_dir_option
@click.option("--taxonomy", "taxonomy_path", type=click.Path())
@json_option
def workflow_run(layout: str, seed_dir: str, backend: str, fixture: str | None,
                 out_dir: str, session_id: str | None, auto_approve_gates: bool,
                 data_dir: str, taxonomy_path: str | None, as_json: bool) -> None:
    """Run a workflow headlessly and export the finished session."""
    store = _open_store(data_dir, taxonomy_path)
    backend_impl = _build_backend(backend, fixture)
    engine = WorkflowEngine(store, Path(data_dir) / "sessions",
                            layout_dir=Path(data_dir) / "layouts")

    # Fault-injection hook used by the crash-persistence tests: hard-kill the
    # process after N completed steps, leaving only the persisted state.
    kill_after = int(os.environ.get("SWARM_KILL_AFTER_STEPS", "-1"))

    def note(message: str) -> None:
        if not as_json:
            click.echo(message)

    try:
        if session_id and engine.sessions.exists(session_id):
            session = engine.load_session(session_id)
            note(f"resuming session {session.session_id} "
                 f"(status {session.status}, cursor {session.cursor})")
        else:
            seeds = load_seed_dir(seed_dir)
            session = engine.create_session(layout, seeds, session_id=session_id)
            note(f"created session {session.session_id}")
    except (UnknownLayout, UnresolvedTool, MissingSeedAsset) as exc:
        click.echo(f"cannot start session: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    except ParseError as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_IO)

    sid = session.session_id
    steps_done = 0
    while True:
        session = engine.load_session(sid)
        if session.status in ("created", "running", "failed"):
            try:
                outcome = engine.run_step(sid, backend=backend_impl)
            except (BackendError, ToolCallBudgetExceeded) as exc:
                click.echo(f"step failed: {exc}", err=True)
                sys.exit(EXIT_BACKEND)
            except WorkflowError as exc:
                click.echo(str(exc), err=True)
                sys.exit(EXIT_VALIDATION)
            produced = ", ".join(f"{n} v{v}" for n, v in outcome.produced_assets)
            note(f"ran {outcome.agent_id}: {produced} ({outcome.tool_calls} tool calls)")
            steps_done += 1
            if steps_done == kill_after:
                os.kill(os.getpid(), signal.SIGKILL)
        elif session.status == "waiting_gate":
            agent = session.current_agent()
            if not auto_approve_gates:
                note(f"blocked at gate {agent.agent_id} ({agent.step_id})")
                sys.exit(EXIT_GATE_BLOCKED)
            engine.resolve_gate(sid, GateDecision(approve=True))
            note(f"auto-approved gate {agent.agent_id}")
            steps_done += 1
            if steps_done == kill_after:
                os.kill(os.getpid(), signal.SIGKILL)
        elif session.status == "completed":
            break
        else:
            click.echo(f"unexpected session status {session.status}", err=True)
            sys.exit(EXIT_BACKEND)

    export_root = engine.export_session(sid, out_dir)
    if as_json:
        _echo_json({"session_id": sid, "status": "completed",
                    "export": str(export_root)})
    else:
        note(f"completed; exported to {export_root}")
    store.close()
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
