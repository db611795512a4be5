"""Bridge between tool descriptors, HTTP execution, and LLM backends.

Descriptors project losslessly into flat function-calling schemas; tool
invocations run against the descriptor's HTTP binding with the response
status returned as data (the model decides how to react to failures); the
backend contract is a single ``complete`` call with two implementations,
a deterministic scripted playback and an adapter for chat-completion APIs.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import quote

import httpx

from .core import ToolDescriptor

RESPONSE_BODY_CAP = 256 * 1024
ROLES = ("system", "user", "assistant", "tool_result")


class ArgumentError(ValueError):
    """Arguments do not satisfy the descriptor; raised before any network I/O."""


class Timeout(RuntimeError):
    """The tool did not answer within the descriptor's timeout."""


class TransportError(RuntimeError):
    """The tool endpoint could not be reached at all."""


class BackendError(RuntimeError):
    """The LLM backend failed or produced no usable response."""


class BackendProtocolError(BackendError):
    """The backend response violates the function-calling contract."""


@dataclass(frozen=True)
class ToolCall:
    tool_id: str
    function_name: str
    arguments: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tool_id": self.tool_id,
            "function_name": self.function_name,
            "arguments": self.arguments,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ToolCall":
        return cls(raw["tool_id"], raw["function_name"], raw.get("arguments", {}))


@dataclass(frozen=True)
class ChatTurn:
    role: str
    content: str
    tool_call: ToolCall | None = None
    timestamp: str = ""

    def to_dict(self) -> dict:
        doc: dict = {"role": self.role, "content": self.content, "timestamp": self.timestamp}
        if self.tool_call is not None:
            doc["tool_call"] = self.tool_call.to_dict()
        return doc

    @classmethod
    def from_dict(cls, raw: dict) -> "ChatTurn":
        call = raw.get("tool_call")
        return cls(
            role=raw["role"],
            content=raw["content"],
            tool_call=None if call is None else ToolCall.from_dict(call),
            timestamp=raw.get("timestamp", ""),
        )


@dataclass(frozen=True)
class FunctionSchema:
    """Flat function-calling view of one descriptor."""

    name: str
    description: str
    parameters: tuple[dict, ...]

    @property
    def required(self) -> tuple[str, ...]:
        return tuple(p["name"] for p in self.parameters if p.get("required"))

    def check_arguments(self, arguments: dict) -> list[str]:
        """All reasons the argument map is unacceptable; empty when valid."""
        problems = []
        by_name = {p["name"]: p for p in self.parameters}
        for name in self.required:
            if name not in arguments:
                problems.append(f"missing required argument {name!r}")
        for name, value in arguments.items():
            param = by_name.get(name)
            if param is None:
                problems.append(f"unexpected argument {name!r}")
                continue
            kind = param["type"]
            if kind == "string" and not isinstance(value, str):
                problems.append(f"argument {name!r} must be a string")
            elif kind == "integer" and (isinstance(value, bool) or not isinstance(value, int)):
                problems.append(f"argument {name!r} must be an integer")
            elif kind == "number" and (
                isinstance(value, bool) or not isinstance(value, (int, float))
            ):
                problems.append(f"argument {name!r} must be a number")
            elif kind == "boolean" and not isinstance(value, bool):
                problems.append(f"argument {name!r} must be a boolean")
            elif kind == "enum" and value not in param.get("enum_values", ()):
                allowed = ", ".join(param.get("enum_values", ()))
                problems.append(f"argument {name!r} must be one of: {allowed}")
        return problems

    def to_json_schema(self) -> dict:
        """OpenAPI-style object schema, for chat-completion APIs."""
        type_map = {"string": "string", "integer": "integer", "number": "number",
                    "boolean": "boolean", "enum": "string"}
        properties = {}
        for p in self.parameters:
            prop: dict = {
                "type": type_map.get(p["type"], "string"),
                "description": p.get("description", ""),
            }
            if p["type"] == "enum":
                prop["enum"] = list(p.get("enum_values", ()))
            properties[p["name"]] = prop
        return {
            "type": "object",
            "properties": properties,
            "required": list(self.required),
        }


def mangle_function_name(tool_id: str, function_name: str) -> str:
    """Flat cross-tool namespace: callers keep their own reverse mapping."""
    return f"{tool_id}__{function_name}"


def to_function_schema(tool_id: str, descriptor: ToolDescriptor) -> FunctionSchema:
    """Lossless projection of a descriptor into the function-calling shape."""
    parameters = tuple(
        {
            "name": p.name,
            "type": p.type,
            "description": p.description,
            "required": p.required,
            **({"enum_values": tuple(p.enum_values)} if p.type == "enum" else {}),
        }
        for p in descriptor.parameters
    )
    return FunctionSchema(
        name=mangle_function_name(tool_id, descriptor.function_name),
        description=descriptor.description,
        parameters=parameters,
    )


@dataclass(frozen=True)
class ToolResult:
    status: int
    media_type: str
    body: str
    truncated: bool
    elapsed: float

    def as_text(self) -> str:
        """Deterministic transcript rendering (elapsed excluded on purpose)."""
        text = f"HTTP {self.status} ({self.media_type})\n{self.body}"
        if self.truncated:
            text += "\n[truncated]"
        return text


def _as_url_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def invoke(
    descriptor: ToolDescriptor,
    arguments: dict,
    *,
    tool_id: str = "",
    client: httpx.Client | None = None,
) -> ToolResult:
    """Execute one tool call against its HTTP binding.

    HTTP error statuses are returned as data; only argument problems,
    timeouts, and transport failures raise.
    """
    schema = to_function_schema(tool_id or "tool", descriptor)
    problems = schema.check_arguments(arguments)
    if problems:
        raise ArgumentError("; ".join(problems))

    binding = descriptor.binding
    url = binding.url_template
    for name in binding.placeholders():
        value = arguments.get(name, "")
        url = url.replace("{" + name + "}", quote(_as_url_value(value), safe=""))

    body_payload = {
        name: arguments[name] for name in binding.body_params if name in arguments
    }
    request_kwargs: dict = {}
    if binding.method == "GET":
        if body_payload:
            request_kwargs["params"] = {
                name: _as_url_value(value) for name, value in body_payload.items()
            }
    elif body_payload or binding.method in ("POST", "PUT", "PATCH"):
        request_kwargs["json"] = body_payload

    own_client = client is None
    client = client or httpx.Client()
    started = time.monotonic()
    try:
        response = client.request(
            binding.method, url, timeout=binding.timeout, **request_kwargs
        )
    except httpx.TimeoutException as exc:
        raise Timeout(f"{url}: no response within {binding.timeout}s") from exc
    except httpx.HTTPError as exc:
        raise TransportError(f"{url}: {exc}") from exc
    finally:
        elapsed = time.monotonic() - started
        if own_client:
            client.close()

    raw = response.content
    truncated = len(raw) > RESPONSE_BODY_CAP
    text = raw[:RESPONSE_BODY_CAP].decode("utf-8", errors="replace")
    media_type = response.headers.get("content-type", "application/octet-stream")
    media_type = media_type.split(";")[0].strip()
    return ToolResult(
        status=response.status_code,
        media_type=media_type,
        body=text,
        truncated=truncated,
        elapsed=elapsed,
    )


@dataclass(frozen=True)
class BackendRequest:
    turns: tuple[ChatTurn, ...]
    functions: tuple[FunctionSchema, ...] = ()
    max_tokens: int | None = None

    def function(self, name: str) -> FunctionSchema | None:
        for schema in self.functions:
            if schema.name == name:
                return schema
        return None


@dataclass(frozen=True)
class BackendToolCall:
    name: str
    arguments: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BackendResponse:
    final_text: str | None = None
    tool_call: BackendToolCall | None = None

    def __post_init__(self) -> None:
        if (self.final_text is None) == (self.tool_call is None):
            raise ValueError("response must carry exactly one of final_text / tool_call")


def complete(request: BackendRequest, backend) -> BackendResponse:
    """Run one backend completion and enforce the function-calling contract."""
    if not request.turns:
        raise BackendError("request contains no turns")
    response = backend.complete(request)
    call = response.tool_call
    if call is not None:
        schema = request.function(call.name)
        if schema is None:
            available = ", ".join(f.name for f in request.functions) or "(none)"
            raise BackendProtocolError(
                f"backend called unavailable function {call.name!r}; available: {available}"
            )
        missing = [name for name in schema.required if name not in call.arguments]
        if missing:
            raise BackendProtocolError(
                f"backend call to {call.name!r} misses required arguments: "
                + ", ".join(missing)
            )
    return response


class ScriptedBackend:
    """Deterministic playback backend for tests and headless golden runs.

    The fixture is an ordered list of match rules; a rule fires when the
    request's last turn has the given role and its content starts with the
    given prefix. Matching is a pure function of (fixture, request).
    """

    def __init__(self, entries: list[dict]) -> None:
        self.entries = []
        for i, entry in enumerate(entries):
            match = entry.get("match", {})
            respond = entry.get("respond", {})
            role = match.get("turn_role", "user")
            if role not in ROLES:
                raise ValueError(f"fixture entry {i}: unknown turn_role {role!r}")
            if ("final_text" in respond) == ("tool_call" in respond):
                raise ValueError(
                    f"fixture entry {i}: respond needs exactly one of final_text/tool_call"
                )
            self.entries.append(
                {
                    "turn_role": role,
                    "content_prefix": match.get("content_prefix", ""),
                    "respond": respond,
                }
            )

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        entries = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(entries, list):
            raise ValueError(f"{path}: scripted fixture must be a JSON list")
        return cls(entries)

    def complete(self, request: BackendRequest) -> BackendResponse:
        last = request.turns[-1]
        for entry in self.entries:
            if last.role == entry["turn_role"] and last.content.startswith(
                entry["content_prefix"]
            ):
                respond = entry["respond"]
                if "final_text" in respond:
                    return BackendResponse(final_text=respond["final_text"])
                call = respond["tool_call"]
                return BackendResponse(
                    tool_call=BackendToolCall(call["name"], call.get("arguments", {}))
                )
        raise BackendError(
            "no scripted response matches last turn "
            f"(role={last.role!r}, content={last.content[:120]!r})"
        )


class HttpLlmBackend:
    """Adapter to any OpenAI-style chat-completion endpoint.

    One retry on transport failure, then BackendError. Parallel tool calls
    are not supported; only the first call of a response is used.
    """

    ROLE_MAP = {"system": "system", "user": "user", "assistant": "assistant",
                "tool_result": "tool"}

    def __init__(self, base_url: str, model: str, api_key: str = "",
                 *, timeout: float = 60.0) -> None:
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.timeout = timeout

    @classmethod
    def from_env(cls, env=os.environ) -> "HttpLlmBackend":
        base_url = env.get("LLM_BASE_URL", "")
        model = env.get("LLM_MODEL", "")
        if not base_url or not model:
            raise BackendError("http_llm backend needs LLM_BASE_URL and LLM_MODEL set")
        return cls(base_url, model, env.get("LLM_API_KEY", ""))

    def _payload(self, request: BackendRequest) -> dict:
        messages = [
            {"role": self.ROLE_MAP[turn.role], "content": turn.content}
            for turn in request.turns
        ]
        payload: dict = {"model": self.model, "messages": messages}
        if request.functions:
            payload["tools"] = [
                {
                    "type": "function",
                    "function": {
                        "name": schema.name,
                        "description": schema.description,
                        "parameters": schema.to_json_schema(),
                    },
                }
                for schema in request.functions
            ]
        if request.max_tokens:
            payload["max_tokens"] = request.max_tokens
        return payload

    def complete(self, request: BackendRequest) -> BackendResponse:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = f"{self.base_url}/chat/completions"
        payload = self._payload(request)

        last_error: Exception | None = None
        for _attempt in range(2):
            try:
                response = httpx.post(url, json=payload, headers=headers,
                                      timeout=self.timeout)
                break
            except httpx.HTTPError as exc:
                last_error = exc
        else:
            raise BackendError(f"backend unreachable after retry: {last_error}")

        if response.status_code >= 400:
            raise BackendError(f"backend returned HTTP {response.status_code}: "
                               f"{response.text[:300]}")
        try:
            message = response.json()["choices"][0]["message"]
        except (ValueError, KeyError, IndexError) as exc:
            raise BackendError(f"malformed backend response: {exc}") from exc

        calls = message.get("tool_calls") or []
        if calls:
            function = calls[0].get("function", {})
            try:
                arguments = json.loads(function.get("arguments") or "{}")
            except ValueError as exc:
                raise BackendProtocolError(
                    f"tool call arguments are not valid JSON: {exc}"
                ) from exc
            return BackendResponse(
                tool_call=BackendToolCall(function.get("name", ""), arguments)
            )
        content = message.get("content")
        if content is None:
            raise BackendProtocolError("backend response has neither text nor tool call")
        return BackendResponse(final_text=content)
