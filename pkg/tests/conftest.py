"""Shared fixtures: taxonomies, manifest builders, local stub HTTP servers."""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from swarmhub.core import Taxonomy, load_default_taxonomy, load_taxonomy

MINI_TAXONOMY_DOC = {
    "schema_version": "mini-1",
    "stages": [
        {
            "id": "I",
            "title": "Stage I",
            "tasks": [
                {
                    "id": 1,
                    "title": "Task 1",
                    "steps": [
                        {"id": "1.1", "title": "Step 1.1"},
                        {"id": "1.2", "title": "Step 1.2"},
                    ],
                }
            ],
        }
    ],
    "requirements": [
        {"id": "R1", "statement": "First requirement.", "step_ids": ["1.1"]},
        {"id": "R2", "statement": "Second requirement.", "step_ids": ["1.1"]},
        {"id": "R3", "statement": "Third requirement.", "step_ids": ["1.2"]},
    ],
}


@pytest.fixture(scope="session")
def default_taxonomy() -> Taxonomy:
    return load_default_taxonomy()


@pytest.fixture()
def mini_taxonomy() -> Taxonomy:
    return load_taxonomy(json.dumps(MINI_TAXONOMY_DOC).encode())


def make_manifest(
    tool_id: str = "org.example.alpha",
    version: str = "1.0.0",
    coverage: list[dict] | None = None,
    descriptors: list[dict] | None = None,
    **overrides,
) -> dict:
    """A structurally valid manifest document, customizable per test."""
    if descriptors is None:
        descriptors = [
            {
                "function_name": "search",
                "description": "Search the corpus for documents matching a query.",
                "parameters": [
                    {
                        "name": "query",
                        "type": "string",
                        "description": "Free-text search query.",
                        "required": True,
                    },
                    {
                        "name": "limit",
                        "type": "integer",
                        "description": "Maximum number of hits.",
                        "required": False,
                    },
                ],
                "binding": {
                    "method": "GET",
                    "url_template": "https://tools.example.org/search?q={query}&n={limit}",
                    "body_params": [],
                    "timeout": 10.0,
                    "expected_media_type": "application/json",
                },
            }
        ]
    doc = {
        "tool_id": tool_id,
        "name": overrides.pop("name", tool_id.rsplit(".", 1)[-1].title()),
        "version": version,
        "description": overrides.pop("description", "Example catalogue entry used in tests."),
        "homepage": overrides.pop("homepage", "https://tools.example.org"),
        "license": overrides.pop("license", "MIT"),
        "descriptors": descriptors,
        "coverage": coverage if coverage is not None else [],
    }
    doc.update(overrides)
    return doc


def manifest_bytes(doc: dict) -> bytes:
    return json.dumps(doc, indent=1).encode()


class _StubHandler(BaseHTTPRequestHandler):
    server_version = "StubHTTP/0"
    protocol_version = "HTTP/1.1"

    def _respond(self) -> None:
        routes = self.server.routes  # type: ignore[attr-defined]
        self.server.requests.append((self.command, self.path))  # type: ignore[attr-defined]
        entry = routes.get(self.path.split("?")[0]) or routes.get(self.path)
        if entry is None:
            body = b'{"error": "not found"}'
            self.send_response(404)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
            return
        status, content_type, body, delay = entry
        if delay:
            time.sleep(delay)
        if callable(body):
            body = body(self)
        if body is None:  # simulate a dropped connection
            self.close_connection = True
            self.connection.close()
            return
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    do_GET = _respond
    do_POST = _respond
    do_PUT = _respond
    do_DELETE = _respond

    def log_message(self, *args) -> None:  # noqa: D102 - silence test output
        pass


class StubServer:
    """Tiny local HTTP server serving a fixed route table.

    Routes map path -> (status, content_type, body_bytes) and may be
    mutated while running. A positive ``delay`` simulates a stalling
    upstream for timeout tests.
    """

    def __init__(self) -> None:
        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
        self._httpd.routes = {}  # type: ignore[attr-defined]
        self._httpd.requests = []  # type: ignore[attr-defined]
        self._thread = threading.Thread(
            target=lambda: self._httpd.serve_forever(poll_interval=0.02), daemon=True
        )
        self._thread.start()

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def requests(self) -> list[tuple[str, str]]:
        return self._httpd.requests  # type: ignore[attr-defined]

    def route(self, path: str, body: bytes | str, *, status: int = 200,
              content_type: str = "application/json", delay: float = 0.0) -> str:
        if isinstance(body, str):
            body = body.encode()
        self._httpd.routes[path] = (status, content_type, body, delay)  # type: ignore[attr-defined]
        return self.base_url + path

    def route_json(self, path: str, payload, **kwargs) -> str:
        return self.route(path, json.dumps(payload).encode(), **kwargs)

    def remove(self, path: str) -> None:
        self._httpd.routes.pop(path, None)  # type: ignore[attr-defined]

    def close(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()


def ask_manifest(base_url: str) -> dict:
    """Corpus-search stub tool used by workflow tests."""
    return make_manifest(
        tool_id="org.example.ask",
        name="Ask",
        description="Natural-language search over a scholarly corpus (stub).",
        coverage=[{"requirement_id": "R5", "level": "full"}],
        descriptors=[{
            "function_name": "search",
            "description": "Search the corpus with a natural-language query.",
            "parameters": [
                {"name": "query", "type": "string",
                 "description": "Natural-language search query.", "required": True},
            ],
            "binding": {
                "method": "GET",
                "url_template": base_url + "/ask/search?q={query}",
                "body_params": [],
                "timeout": 10.0,
                "expected_media_type": "application/json",
            },
        }],
    )


def scholar_manifest(base_url: str) -> dict:
    """Term-lookup stub tool used by workflow tests."""
    return make_manifest(
        tool_id="org.example.scholar",
        name="Scholar",
        description="Scholarly metadata lookup for individual search terms (stub).",
        coverage=[{"requirement_id": "R13", "level": "partial"}],
        descriptors=[{
            "function_name": "lookup",
            "description": "Look up how many works match a search term.",
            "parameters": [
                {"name": "term", "type": "string",
                 "description": "Single search term.", "required": True},
            ],
            "binding": {
                "method": "GET",
                "url_template": base_url + "/scholar/lookup?term={term}",
                "body_params": [],
                "timeout": 10.0,
                "expected_media_type": "application/json",
            },
        }],
    )


@pytest.fixture()
def stub_server():
    server = StubServer()
    yield server
    server.close()


@pytest.fixture()
def stub_servers():
    """Factory for multiple stub servers torn down after the test."""
    servers: list[StubServer] = []

    def make() -> StubServer:
        server = StubServer()
        servers.append(server)
        return server

    yield make
    for server in servers:
        server.close()


FIXTURES = __import__("pathlib").Path(__file__).parent / "fixtures"

ASK_SEARCH_RESPONSE = {
    "results": [
        "Aeroelastic tailoring of UAV wings",
        "Multidisciplinary wing optimization survey",
    ]
}
SCHOLAR_LOOKUP_RESPONSE = {"hits": 42, "sample": "Fixed-wing UAV structures"}


def build_workflow_data_dir(data_dir, make_server):
    """Data dir with the catalogue the stage-1 layout needs, plus live stub
    tool servers (one per tool). Returns (data_dir, [servers])."""
    from swarmhub.core import default_taxonomy_bytes, parse_manifest
    from swarmhub.store import CatalogueStore

    ask_server = make_server()
    ask_server.route_json("/ask/search", ASK_SEARCH_RESPONSE)
    scholar_server = make_server()
    scholar_server.route_json("/scholar/lookup", SCHOLAR_LOOKUP_RESPONSE)

    store = CatalogueStore(data_dir / "catalogue.db",
                           taxonomy_bytes=default_taxonomy_bytes())
    for doc in (ask_manifest(ask_server.base_url),
                scholar_manifest(scholar_server.base_url)):
        store.put(parse_manifest(manifest_bytes(doc)), origin="direct")
    store.close()
    return data_dir, [ask_server, scholar_server]
