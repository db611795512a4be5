"""Asynchronous manifest collection from developer-controlled sources.

Sources are polled; fetches run with bounded parallelism while ingestion
into the store stays serialized. The catalogue is reconstructible from the
source list alone: wiping the store and reconciling rebuilds it.
"""

from __future__ import annotations

import json
import logging
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING
from urllib.parse import urljoin, urlparse

import httpx

from .core import ParseError, ValidationReport, Violation, parse_manifest, validate_annotation
from .util import utc_now_iso

if TYPE_CHECKING:
    from .store import CatalogueStore

logger = logging.getLogger(__name__)

SOURCE_KINDS = ("raw_manifest_url", "repository_listing")
OUTCOMES = ("ingested", "unchanged", "invalid", "unreachable")

DEFAULT_TIMEOUT = 10.0
DEFAULT_PARALLELISM = 8
MAX_MANIFEST_BYTES = 1024 * 1024
MIN_POLL_INTERVAL = 60.0


class Unreachable(RuntimeError):
    """The source (or one of its documents) could not be fetched."""


class HarvestInProgress(RuntimeError):
    """A reconcile round is already running (rounds are single-flight)."""


@dataclass(frozen=True)
class HarvestSource:
    source_id: str
    kind: str
    location: str
    poll_interval: float = 300.0
    enabled: bool = True

    def __post_init__(self) -> None:
        if self.kind not in SOURCE_KINDS:
            raise ValueError(f"unknown source kind {self.kind!r}")
        parsed = urlparse(self.location)
        if not parsed.scheme or not parsed.netloc:
            raise ValueError(f"source location must be an absolute URL: {self.location!r}")
        if self.poll_interval < MIN_POLL_INTERVAL:
            raise ValueError(f"poll_interval must be >= {MIN_POLL_INTERVAL:.0f}s")

    def to_dict(self) -> dict:
        return {
            "source_id": self.source_id,
            "kind": self.kind,
            "location": self.location,
            "poll_interval": self.poll_interval,
            "enabled": self.enabled,
        }


@dataclass(frozen=True)
class HarvestRecord:
    source_id: str
    fetched_at: str
    outcome: str
    content_hash: str | None = None
    violations: ValidationReport | None = None
    detail: str = ""

    def __post_init__(self) -> None:
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")
        if self.outcome in ("ingested", "unchanged") and not self.content_hash:
            raise ValueError(f"outcome {self.outcome} requires a content hash")

    def to_dict(self) -> dict:
        return {
            "source_id": self.source_id,
            "fetched_at": self.fetched_at,
            "outcome": self.outcome,
            "content_hash": self.content_hash,
            "violations": None if self.violations is None else self.violations.to_list(),
            "detail": self.detail,
        }


@dataclass(frozen=True)
class FetchResult:
    documents: tuple[tuple[bytes, str], ...]
    failures: tuple[tuple[str, str], ...] = ()

    @property
    def clean(self) -> bool:
        return not self.failures


def _get_capped(client: httpx.Client, url: str, timeout: float) -> bytes:
    """GET with a response size cap; oversize or HTTP >= 400 raises Unreachable."""
    try:
        with client.stream("GET", url, timeout=timeout, follow_redirects=True) as response:
            if response.status_code >= 400:
                raise Unreachable(f"{url}: HTTP {response.status_code}")
            body = b""
            for chunk in response.iter_bytes():
                body += chunk
                if len(body) > MAX_MANIFEST_BYTES:
                    raise Unreachable(f"{url}: response exceeds {MAX_MANIFEST_BYTES} bytes")
            return body
    except httpx.HTTPError as exc:
        raise Unreachable(f"{url}: {exc}") from exc


def fetch_source(
    source: HarvestSource,
    *,
    client: httpx.Client | None = None,
    timeout: float = DEFAULT_TIMEOUT,
) -> FetchResult:
    """Fetch every manifest document a source offers.

    A raw_manifest_url source yields exactly one document. A
    repository_listing source yields one document per listed path; a
    failing path is reported in ``failures`` without sinking its siblings.
    Raises Unreachable only when the source location itself fails.
    """
    own_client = client is None
    client = client or httpx.Client()
    try:
        if source.kind == "raw_manifest_url":
            body = _get_capped(client, source.location, timeout)
            return FetchResult(documents=((body, source.location),))

        listing_bytes = _get_capped(client, source.location, timeout)
        try:
            listing = json.loads(listing_bytes)
        except ValueError as exc:
            raise Unreachable(f"{source.location}: listing is not valid JSON: {exc}") from exc
        if not isinstance(listing, list) or not all(isinstance(u, str) for u in listing):
            raise Unreachable(f"{source.location}: listing must be a JSON array of URLs")

        documents: list[tuple[bytes, str]] = []
        failures: list[tuple[str, str]] = []
        for entry in listing:
            url = urljoin(source.location, entry)
            try:
                documents.append((_get_capped(client, url, timeout), url))
            except Unreachable as exc:
                failures.append((url, str(exc)))
        return FetchResult(documents=tuple(documents), failures=tuple(failures))
    finally:
        if own_client:
            client.close()


def ingest(manifest_bytes: bytes, source_id: str, store: "CatalogueStore") -> HarvestRecord:
    """Parse, validate, and upsert one manifest; the outcome is recorded.

    New content is upserted (ingested), identical content refreshed
    (unchanged), and anything failing validation or conflicting with the
    stored hash for its (tool_id, version) leaves the store untouched
    (invalid). Only StoreUnavailable aborts.
    """
    fetched_at = utc_now_iso()

    def done(record: HarvestRecord) -> HarvestRecord:
        store.append_harvest_record(record)
        return record

    try:
        annotation = parse_manifest(manifest_bytes)
    except ParseError as exc:
        report = ValidationReport((Violation("", "error", f"malformed manifest: {exc}"),))
        return done(HarvestRecord(source_id, fetched_at, "invalid", violations=report))

    report = validate_annotation(annotation, store.taxonomy)
    if not report.ok:
        return done(HarvestRecord(source_id, fetched_at, "invalid", violations=report))

    new_hash = annotation.content_hash
    existing_hash = store.get_hash(annotation.tool_id, annotation.version)
    if existing_hash is None:
        store.put(annotation, origin=source_id, now=fetched_at)
        return done(HarvestRecord(source_id, fetched_at, "ingested", content_hash=new_hash))
    if existing_hash == new_hash:
        store.touch(annotation.tool_id, annotation.version, now=fetched_at)
        return done(HarvestRecord(source_id, fetched_at, "unchanged", content_hash=new_hash))

    # Conflicting content for an existing (tool_id, version): keep the
    # first-ingested record so a mirror cannot hijack a tool id.
    conflict = ValidationReport((
        Violation(
            "content_hash",
            "error",
            f"hash conflict for ({annotation.tool_id}, {annotation.version}): "
            f"stored {existing_hash[:12]}…, offered {new_hash[:12]}…",
        ),
    ))
    return done(HarvestRecord(source_id, fetched_at, "invalid", violations=conflict,
                              detail="hash conflict"))


class Harvester:
    """Runs reconcile rounds: parallel fetch, serialized ingest, staleness pass."""

    def __init__(
        self,
        store: "CatalogueStore",
        *,
        parallelism: int = DEFAULT_PARALLELISM,
        timeout: float = DEFAULT_TIMEOUT,
    ) -> None:
        self.store = store
        self.parallelism = max(1, parallelism)
        self.timeout = timeout
        self._round_lock = threading.Lock()

    @property
    def running(self) -> bool:
        if self._round_lock.acquire(blocking=False):
            self._round_lock.release()
            return False
        return True

    def reconcile(self, sources: list[HarvestSource] | None = None) -> dict:
        """One full harvest round over every enabled source.

        Returns counts per outcome plus the number of entries flagged
        stale. Raises HarvestInProgress if a round is already running.
        """
        if not self._round_lock.acquire(blocking=False):
            raise HarvestInProgress("a harvest round is already running")
        try:
            return self._run_round(sources)
        finally:
            self._round_lock.release()

    def _run_round(self, sources: list[HarvestSource] | None) -> dict:
        if sources is None:
            sources = self.store.sources()
        sources = sorted(sources, key=lambda s: s.source_id)
        enabled = [s for s in sources if s.enabled]

        results: dict[str, FetchResult | Unreachable] = {}
        with httpx.Client() as client:
            with ThreadPoolExecutor(max_workers=self.parallelism) as pool:
                futures = {
                    source.source_id: pool.submit(
                        fetch_source, source, client=client, timeout=self.timeout
                    )
                    for source in enabled
                }
                for source_id, future in futures.items():
                    try:
                        results[source_id] = future.result()
                    except Unreachable as exc:
                        results[source_id] = exc

        summary: Counter = Counter({outcome: 0 for outcome in OUTCOMES})
        seen_keys: set[tuple[str, str]] = set()
        clean_sources: set[str] = set()

        for source in enabled:
            result = results[source.source_id]
            if isinstance(result, Unreachable):
                logger.warning("source %s unreachable: %s", source.source_id, result)
                self.store.append_harvest_record(
                    HarvestRecord(source.source_id, utc_now_iso(), "unreachable",
                                  detail=str(result))
                )
                summary["unreachable"] += 1
                continue
            if result.clean:
                clean_sources.add(source.source_id)
            for url, message in result.failures:
                self.store.append_harvest_record(
                    HarvestRecord(source.source_id, utc_now_iso(), "unreachable",
                                  detail=message)
                )
                summary["unreachable"] += 1
            for body, url in result.documents:
                record = ingest(body, source.source_id, self.store)
                summary[record.outcome] += 1
                if record.outcome in ("ingested", "unchanged"):
                    annotation = parse_manifest(body)
                    seen_keys.add((annotation.tool_id, annotation.version))

        summary["stale"] = self._staleness_pass(enabled, clean_sources, seen_keys)
        return dict(summary)

    def _staleness_pass(
        self,
        enabled: list[HarvestSource],
        clean_sources: set[str],
        seen_keys: set[tuple[str, str]],
    ) -> int:
        """Flag entries whose origin vanished or no longer lists them.

        Entries from sources that merely failed this round keep their
        status; direct submissions are never flagged by harvesting.
        """
        live_ids = {source.source_id for source in enabled}
        flagged = 0
        for entry in self.store.entries():
            if entry.origin == "direct":
                continue
            key = (entry.annotation.tool_id, entry.annotation.version)
            if entry.origin not in live_ids:
                if not entry.stale:
                    self.store.set_stale(*key, stale=True)
                    flagged += 1
            elif entry.origin in clean_sources and key not in seen_keys:
                if not entry.stale:
                    self.store.set_stale(*key, stale=True)
                    flagged += 1
        return flagged


def reconcile(store: "CatalogueStore", sources: list[HarvestSource] | None = None,
              *, parallelism: int = DEFAULT_PARALLELISM,
              timeout: float = DEFAULT_TIMEOUT) -> dict:
    """One-shot reconcile round with its own (per-call) single-flight guard."""
    return Harvester(store, parallelism=parallelism, timeout=timeout).reconcile(sources)
