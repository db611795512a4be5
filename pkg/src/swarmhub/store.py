"""Embedded persistence for the catalogue, harvest sources, and harvest log.

Single-node sqlite storage in WAL mode: many readers, serialized writes,
durable across process restarts. The store is a reconstructible cache of
the harvested sources, never the source of truth.
"""

from __future__ import annotations

import json
import sqlite3
import threading
from dataclasses import dataclass
from pathlib import Path

from .core import (
    Taxonomy,
    ToolAnnotation,
    load_taxonomy,
    parse_manifest,
    semver_key,
    serialize_manifest,
)
from .harvest import HarvestRecord, HarvestSource
from .util import utc_now_iso


class StoreUnavailable(RuntimeError):
    """Persistence failed; the only aborting error during ingestion."""


@dataclass(frozen=True)
class CatalogueEntry:
    annotation: ToolAnnotation
    content_hash: str
    origin: str
    first_seen: str
    last_seen: str
    stale: bool


_SCHEMA = """
CREATE TABLE IF NOT EXISTS tools (
    tool_id      TEXT NOT NULL,
    version      TEXT NOT NULL,
    manifest     TEXT NOT NULL,
    content_hash TEXT NOT NULL,
    origin       TEXT NOT NULL,
    first_seen   TEXT NOT NULL,
    last_seen    TEXT NOT NULL,
    stale        INTEGER NOT NULL DEFAULT 0,
    PRIMARY KEY (tool_id, version)
);
CREATE TABLE IF NOT EXISTS sources (
    source_id     TEXT PRIMARY KEY,
    kind          TEXT NOT NULL,
    location      TEXT NOT NULL,
    poll_interval REAL NOT NULL,
    enabled       INTEGER NOT NULL DEFAULT 1
);
CREATE TABLE IF NOT EXISTS harvest_log (
    seq          INTEGER PRIMARY KEY AUTOINCREMENT,
    source_id    TEXT NOT NULL,
    fetched_at   TEXT NOT NULL,
    outcome      TEXT NOT NULL,
    content_hash TEXT,
    violations   TEXT,
    detail       TEXT NOT NULL DEFAULT ''
);
CREATE TABLE IF NOT EXISTS meta (
    key   TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
"""


class CatalogueStore:
    """Catalogue entries keyed by (tool_id, version), plus sources and log."""

    def __init__(self, path: str | Path, taxonomy_bytes: bytes | None = None) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            self._conn = sqlite3.connect(self.path, check_same_thread=False)
            self._conn.execute("PRAGMA journal_mode=WAL")
            self._conn.execute("PRAGMA synchronous=NORMAL")
            self._conn.executescript(_SCHEMA)
            self._conn.commit()
        except sqlite3.Error as exc:
            raise StoreUnavailable(f"cannot open store at {self.path}: {exc}") from exc
        self._lock = threading.RLock()
        self._taxonomy: Taxonomy | None = None
        if taxonomy_bytes is not None:
            self.set_taxonomy(taxonomy_bytes)

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    # -- taxonomy ---------------------------------------------------------

    def set_taxonomy(self, taxonomy_bytes: bytes) -> Taxonomy:
        taxonomy = load_taxonomy(taxonomy_bytes)
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO meta (key, value) VALUES ('taxonomy', ?) "
                "ON CONFLICT(key) DO UPDATE SET value=excluded.value",
                (taxonomy_bytes.decode("utf-8"),),
            )
        self._taxonomy = taxonomy
        return taxonomy

    @property
    def taxonomy(self) -> Taxonomy:
        if self._taxonomy is None:
            with self._lock:
                row = self._conn.execute(
                    "SELECT value FROM meta WHERE key='taxonomy'"
                ).fetchone()
            if row is None:
                raise StoreUnavailable("store has no taxonomy configured")
            self._taxonomy = load_taxonomy(row[0].encode("utf-8"))
        return self._taxonomy

    @property
    def has_taxonomy(self) -> bool:
        with self._lock:
            row = self._conn.execute("SELECT 1 FROM meta WHERE key='taxonomy'").fetchone()
        return row is not None

    @property
    def taxonomy_bytes(self) -> bytes:
        with self._lock:
            row = self._conn.execute(
                "SELECT value FROM meta WHERE key='taxonomy'"
            ).fetchone()
        if row is None:
            raise StoreUnavailable("store has no taxonomy configured")
        return row[0].encode("utf-8")

    # -- tools ------------------------------------------------------------

    def _row_to_entry(self, row: sqlite3.Row | tuple) -> CatalogueEntry:
        manifest, content_hash, origin, first_seen, last_seen, stale = row[2:8]
        annotation = parse_manifest(manifest).with_origin(origin)
        return CatalogueEntry(
            annotation=annotation,
            content_hash=content_hash,
            origin=origin,
            first_seen=first_seen,
            last_seen=last_seen,
            stale=bool(stale),
        )

    _ENTRY_COLS = "tool_id, version, manifest, content_hash, origin, first_seen, last_seen, stale"

    def get_entry(self, tool_id: str, version: str | None = None) -> CatalogueEntry | None:
        with self._lock:
            if version is not None:
                row = self._conn.execute(
                    f"SELECT {self._ENTRY_COLS} FROM tools WHERE tool_id=? AND version=?",
                    (tool_id, version),
                ).fetchone()
                return None if row is None else self._row_to_entry(row)
            rows = self._conn.execute(
                f"SELECT {self._ENTRY_COLS} FROM tools WHERE tool_id=?", (tool_id,)
            ).fetchall()
        if not rows:
            return None
        newest = max(rows, key=lambda r: semver_key(r[1]))
        return self._row_to_entry(newest)

    def get_hash(self, tool_id: str, version: str) -> str | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT content_hash FROM tools WHERE tool_id=? AND version=?",
                (tool_id, version),
            ).fetchone()
        return None if row is None else row[0]

    def put(self, annotation: ToolAnnotation, *, origin: str, now: str | None = None) -> None:
        now = now or utc_now_iso()
        manifest_text = serialize_manifest(annotation).decode("utf-8")
        try:
            with self._lock, self._conn:
                self._conn.execute(
                    "INSERT INTO tools (tool_id, version, manifest, content_hash, origin,"
                    " first_seen, last_seen, stale) VALUES (?,?,?,?,?,?,?,0) "
                    "ON CONFLICT(tool_id, version) DO UPDATE SET "
                    " manifest=excluded.manifest, content_hash=excluded.content_hash,"
                    " origin=excluded.origin, last_seen=excluded.last_seen, stale=0",
                    (
                        annotation.tool_id,
                        annotation.version,
                        manifest_text,
                        annotation.content_hash,
                        origin,
                        now,
                        now,
                    ),
                )
        except sqlite3.Error as exc:
            raise StoreUnavailable(f"write failed: {exc}") from exc

    def touch(self, tool_id: str, version: str, now: str | None = None) -> None:
        """Refresh last_seen and clear staleness after an unchanged harvest."""
        now = now or utc_now_iso()
        with self._lock, self._conn:
            self._conn.execute(
                "UPDATE tools SET last_seen=?, stale=0 WHERE tool_id=? AND version=?",
                (now, tool_id, version),
            )

    def set_stale(self, tool_id: str, version: str, stale: bool = True) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "UPDATE tools SET stale=? WHERE tool_id=? AND version=?",
                (1 if stale else 0, tool_id, version),
            )

    def entries(self, *, origin: str | None = None) -> list[CatalogueEntry]:
        query = f"SELECT {self._ENTRY_COLS} FROM tools"
        params: tuple = ()
        if origin is not None:
            query += " WHERE origin=?"
            params = (origin,)
        query += " ORDER BY tool_id, version"
        with self._lock:
            rows = self._conn.execute(query, params).fetchall()
        return [self._row_to_entry(row) for row in rows]

    def latest_entries(self) -> list[CatalogueEntry]:
        """One entry per tool_id: the highest semantic version."""
        by_tool: dict[str, CatalogueEntry] = {}
        for entry in self.entries():
            current = by_tool.get(entry.annotation.tool_id)
            if current is None or semver_key(entry.annotation.version) > semver_key(
                current.annotation.version
            ):
                by_tool[entry.annotation.tool_id] = entry
        return [by_tool[tool_id] for tool_id in sorted(by_tool)]

    def catalogue_keys(self) -> set[tuple[str, str, str]]:
        """(tool_id, version, content_hash) triples, for set comparisons."""
        with self._lock:
            rows = self._conn.execute(
                "SELECT tool_id, version, content_hash FROM tools"
            ).fetchall()
        return {tuple(row) for row in rows}

    # -- sources ----------------------------------------------------------

    def put_source(self, source: HarvestSource) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO sources (source_id, kind, location, poll_interval, enabled)"
                " VALUES (?,?,?,?,?) ON CONFLICT(source_id) DO UPDATE SET"
                " kind=excluded.kind, location=excluded.location,"
                " poll_interval=excluded.poll_interval, enabled=excluded.enabled",
                (
                    source.source_id,
                    source.kind,
                    source.location,
                    source.poll_interval,
                    1 if source.enabled else 0,
                ),
            )

    def get_source(self, source_id: str) -> HarvestSource | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT source_id, kind, location, poll_interval, enabled"
                " FROM sources WHERE source_id=?",
                (source_id,),
            ).fetchone()
        if row is None:
            return None
        return HarvestSource(row[0], row[1], row[2], row[3], bool(row[4]))

    def sources(self) -> list[HarvestSource]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT source_id, kind, location, poll_interval, enabled"
                " FROM sources ORDER BY source_id"
            ).fetchall()
        return [HarvestSource(r[0], r[1], r[2], r[3], bool(r[4])) for r in rows]

    def set_source_enabled(self, source_id: str, enabled: bool) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "UPDATE sources SET enabled=? WHERE source_id=?",
                (1 if enabled else 0, source_id),
            )

    # -- harvest log --------------------------------------------------------

    def append_harvest_record(self, record: HarvestRecord) -> None:
        violations = (
            None if record.violations is None else json.dumps(record.violations.to_list())
        )
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO harvest_log (source_id, fetched_at, outcome, content_hash,"
                " violations, detail) VALUES (?,?,?,?,?,?)",
                (
                    record.source_id,
                    record.fetched_at,
                    record.outcome,
                    record.content_hash,
                    violations,
                    record.detail,
                ),
            )

    def harvest_log(self) -> list[dict]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT seq, source_id, fetched_at, outcome, content_hash, violations, detail"
                " FROM harvest_log ORDER BY seq"
            ).fetchall()
        return [
            {
                "seq": r[0],
                "source_id": r[1],
                "fetched_at": r[2],
                "outcome": r[3],
                "content_hash": r[4],
                "violations": None if r[5] is None else json.loads(r[5]),
                "detail": r[6],
            }
            for r in rows
        ]
