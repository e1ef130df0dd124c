"""Completion backends behind one interface.

Three interchangeable sources of model output: a live HTTP chat-completion
endpoint, a scripted deterministic backend for offline tests, and a replay
backend that re-serves a recorded transcript while checking that requests
have not drifted. A factory hands out per-node sessions so every agent run
lands in its own numbered transcript file.
"""

from __future__ import annotations

import difflib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import requests

from .errors import (
    BudgetExceededError,
    MalformedResponseError,
    ReplayMismatchError,
    ScriptExhaustedError,
    TranscriptClosedError,
    TransportError,
)
from .util import Clock

log = logging.getLogger(__name__)

API_KEY_ENV = "SYNTHFORGE_API_KEY"
DEFAULT_MAX_CALLS = 500
RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY = 1.0


@dataclass(frozen=True)
class ModelSpec:
    """One model entry: wire identifier plus decoding parameters."""

    model_id: str
    temperature: float = 0.0
    max_output_tokens: int = 4096

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be > 0")


@dataclass(frozen=True)
class ModelRoster:
    """Which model serves each role: generation versus evaluation."""

    generator_model: ModelSpec
    evaluator_model: ModelSpec

    def for_role(self, model_role: str) -> ModelSpec:
        if model_role == "generator":
            return self.generator_model
        if model_role == "evaluator":
            return self.evaluator_model
        raise ValueError(f"unknown model role {model_role!r}")


@dataclass(frozen=True)
class CompletionRequest:
    """What gets sent per call: role, ordered messages, offered tools."""

    model_role: str
    messages: tuple[tuple[str, str], ...]
    tool_schemas: tuple[Mapping[str, Any], ...] = ()

    def __post_init__(self) -> None:
        if self.model_role not in ("generator", "evaluator"):
            raise ValueError(f"unknown model role {self.model_role!r}")
        if not self.messages:
            raise ValueError("messages must be nonempty")
        if self.messages[0][0] != "system":
            raise ValueError("first message role must be 'system'")

    def to_dict(self) -> dict[str, Any]:
        return {
            "model_role": self.model_role,
            "messages": [[role, text] for role, text in self.messages],
            "tool_schemas": [dict(schema) for schema in self.tool_schemas],
        }

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> "CompletionRequest":
        return cls(
            model_role=str(raw["model_role"]),
            messages=tuple((str(r), str(t)) for r, t in raw["messages"]),
            tool_schemas=tuple(dict(s) for s in raw.get("tool_schemas", ())),
        )


@dataclass(frozen=True)
class CompletionResponse:
    """Either plain text or a single tool call; never both."""

    kind: str
    text: str = ""
    tool_name: str = ""
    arguments: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind == "text":
            if self.tool_name or self.arguments:
                raise ValueError("text response must not carry a tool call")
        elif self.kind == "tool_call":
            if not self.tool_name:
                raise ValueError("tool_call response needs a tool_name")
            if self.text:
                raise ValueError("tool_call response must not carry text")
        else:
            raise ValueError(f"unknown response kind {self.kind!r}")

    @classmethod
    def of_text(cls, text: str) -> "CompletionResponse":
        return cls(kind="text", text=text)

    @classmethod
    def of_tool_call(
        cls, tool_name: str, arguments: Mapping[str, Any]
    ) -> "CompletionResponse":
        return cls(kind="tool_call", tool_name=tool_name, arguments=dict(arguments))

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "text":
            return {"kind": "text", "text": self.text}
        return {
            "kind": "tool_call",
            "tool_name": self.tool_name,
            "arguments": dict(self.arguments),
        }

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> "CompletionResponse":
        if raw.get("kind") == "text":
            return cls.of_text(str(raw.get("text", "")))
        if raw.get("kind") == "tool_call":
            return cls.of_tool_call(
                str(raw.get("tool_name", "")), raw.get("arguments", {}) or {}
            )
        raise MalformedResponseError(f"unknown response kind {raw.get('kind')!r}")


@dataclass(frozen=True)
class TranscriptEntry:
    """One recorded exchange; transcripts are line-delimited JSON."""

    sequence_no: int
    request: CompletionRequest
    response: CompletionResponse
    timestamp: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "sequence_no": self.sequence_no,
            "request": self.request.to_dict(),
            "response": self.response.to_dict(),
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> "TranscriptEntry":
        return cls(
            sequence_no=int(raw["sequence_no"]),
            request=CompletionRequest.from_mapping(raw["request"]),
            response=CompletionResponse.from_mapping(raw["response"]),
            timestamp=str(raw.get("timestamp", "")),
        )


def load_transcript(path: Path) -> list[TranscriptEntry]:
    entries: list[TranscriptEntry] = []
    for lineno, line in enumerate(path.read_text("utf-8").splitlines()):
        if not line.strip():
            continue
        try:
            entries.append(TranscriptEntry.from_mapping(json.loads(line)))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise MalformedResponseError(f"{path}:{lineno + 1}: {exc}") from exc
    for expect, entry in enumerate(entries):
        if entry.sequence_no != expect:
            raise MalformedResponseError(
                f"{path}: sequence_no {entry.sequence_no} at position {expect}"
            )
    return entries


class Backend:
    """Interface every completion source implements."""

    name = "backend"
    deterministic = False

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        raise NotImplementedError


class ScriptedBackend(Backend):
    """Serves a fixed list of responses in order; exhaustion is an error."""

    name = "scripted"
    deterministic = True

    def __init__(self, responses: Sequence[CompletionResponse]) -> None:
        self._responses = list(responses)
        self._cursor = 0
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: Path) -> "ScriptedBackend":
        raw = json.loads(path.read_text("utf-8"))
        if isinstance(raw, Mapping):
            raw = raw.get("responses", [])
        return cls([CompletionResponse.from_mapping(item) for item in raw])

    def __len__(self) -> int:
        return len(self._responses)

    @property
    def calls_made(self) -> int:
        return self._cursor

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        with self._lock:
            if self._cursor >= len(self._responses):
                raise ScriptExhaustedError(
                    f"script exhausted after {len(self._responses)} responses"
                )
            response = self._responses[self._cursor]
            self._cursor += 1
        return response


class ReplayBackend(Backend):
    """Re-serves one recorded transcript, verifying each request matches."""

    name = "replay"
    deterministic = True

    def __init__(self, transcript_path: Path) -> None:
        self._path = transcript_path
        self._entries = load_transcript(transcript_path)
        self._cursor = 0
        self._lock = threading.Lock()

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        with self._lock:
            if self._cursor >= len(self._entries):
                raise ScriptExhaustedError(
                    f"replay of {self._path} exhausted after "
                    f"{len(self._entries)} entries"
                )
            entry = self._entries[self._cursor]
            recorded = entry.request
            if recorded.messages != request.messages:
                diff = _message_diff(recorded.messages, request.messages)
                raise ReplayMismatchError(entry.sequence_no, diff, str(self._path))
            self._cursor += 1
        return entry.response


def _message_diff(
    recorded: Sequence[tuple[str, str]], actual: Sequence[tuple[str, str]]
) -> str:
    def flatten(messages: Sequence[tuple[str, str]]) -> list[str]:
        lines: list[str] = []
        for role, text in messages:
            lines.append(f"<{role}>")
            lines.extend(text.splitlines())
        return lines

    diff = difflib.unified_diff(
        flatten(recorded), flatten(actual), "recorded", "actual", lineterm=""
    )
    return "\n".join(diff)


class HttpBackend(Backend):
    """Live OpenAI-compatible chat-completion endpoint."""

    name = "http"

    def __init__(
        self,
        base_url: str,
        roster: ModelRoster,
        api_key: str | None = None,
        session: requests.Session | None = None,
        sleep=time.sleep,
    ) -> None:
        self._base_url = base_url.rstrip("/")
        self._roster = roster
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self._api_key = key
        self._session = session or requests.Session()
        self._sleep = sleep

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        payload = self._wire_payload(request)
        url = f"{self._base_url}/v1/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"

        last_error: Exception | None = None
        for attempt in range(RETRY_ATTEMPTS):
            try:
                reply = self._session.post(
                    url, json=payload, headers=headers, timeout=120
                )
            except requests.RequestException as exc:
                last_error = exc
            else:
                if reply.status_code == 200:
                    return self._parse_reply(reply)
                if reply.status_code in (429,) or reply.status_code >= 500:
                    last_error = TransportError(
                        f"HTTP {reply.status_code}: {reply.text[:200]}"
                    )
                else:
                    raise TransportError(
                        f"HTTP {reply.status_code}: {reply.text[:200]}"
                    )
            if attempt + 1 < RETRY_ATTEMPTS:
                self._sleep(RETRY_BASE_DELAY * (2**attempt))
        raise TransportError(f"giving up after {RETRY_ATTEMPTS} attempts: {last_error}")

    def _wire_payload(self, request: CompletionRequest) -> dict[str, Any]:
        spec = self._roster.for_role(request.model_role)
        payload: dict[str, Any] = {
            "model": spec.model_id,
            "temperature": spec.temperature,
            "max_tokens": spec.max_output_tokens,
            "messages": [
                {"role": role, "content": text} for role, text in request.messages
            ],
        }
        if request.tool_schemas:
            payload["tools"] = [
                {"type": "function", "function": dict(schema)}
                for schema in request.tool_schemas
            ]
        return payload

    def _parse_reply(self, reply: requests.Response) -> CompletionResponse:
        try:
            body = reply.json()
            message = body["choices"][0]["message"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponseError(f"cannot parse completion: {exc}") from exc

        calls = message.get("tool_calls") or []
        if calls:
            function = calls[0].get("function", {})
            name = function.get("name", "")
            raw_args = function.get("arguments", "{}")
            try:
                arguments = json.loads(raw_args) if isinstance(raw_args, str) else raw_args
            except json.JSONDecodeError as exc:
                raise MalformedResponseError(
                    f"tool arguments are not JSON: {exc}"
                ) from exc
            if not name:
                raise MalformedResponseError("tool call without a name")
            return CompletionResponse.of_tool_call(name, arguments)

        content = message.get("content")
        if content is None:
            raise MalformedResponseError("completion has neither content nor tool call")
        return CompletionResponse.of_text(str(content))


class TranscriptRecorder:
    """Appends entries to one .jsonl file; sequence numbers are assigned here."""

    def __init__(self, path: Path, clock: Clock) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        self._path = path
        self._clock = clock
        self._handle = path.open("w", encoding="utf-8")
        self._next_seq = 0
        self._lock = threading.Lock()

    @property
    def path(self) -> Path:
        return self._path

    def record(
        self, request: CompletionRequest, response: CompletionResponse
    ) -> TranscriptEntry:
        with self._lock:
            if self._handle is None:
                raise TranscriptClosedError(f"transcript {self._path} already closed")
            entry = TranscriptEntry(
                sequence_no=self._next_seq,
                request=request,
                response=response,
                timestamp=self._clock.timestamp(),
            )
            self._handle.write(
                json.dumps(entry.to_dict(), ensure_ascii=False, sort_keys=True) + "\n"
            )
            self._handle.flush()
            self._next_seq += 1
        return entry

    def close(self) -> None:
        with self._lock:
            if self._handle is not None:
                self._handle.close()
                self._handle = None


class CallBudget:
    """Run-wide cap on completion calls, shared by all sessions."""

    def __init__(self, max_calls: int) -> None:
        self._remaining = max_calls
        self._max = max_calls
        self._lock = threading.Lock()

    def spend(self) -> None:
        with self._lock:
            if self._remaining <= 0:
                raise BudgetExceededError(
                    f"completion budget of {self._max} calls exhausted"
                )
            self._remaining -= 1

    @property
    def used(self) -> int:
        return self._max - self._remaining


class GatewaySession:
    """One agent run's view of the gateway: complete, optionally record."""

    def __init__(
        self,
        backend: Backend,
        budget: CallBudget,
        recorder: TranscriptRecorder | None = None,
    ) -> None:
        self._backend = backend
        self._budget = budget
        self._recorder = recorder

    @property
    def transcript_path(self) -> Path | None:
        return self._recorder.path if self._recorder else None

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        self._budget.spend()
        response = self._backend.complete(request)
        if self._recorder is not None:
            self._recorder.record(request, response)
        return response

    def close(self) -> None:
        if self._recorder is not None:
            self._recorder.close()


class GatewayFactory:
    """Hands out per-node sessions; owns transcript numbering and the budget.

    In replay mode each session gets its own backend bound to the matching
    numbered transcript; otherwise all sessions share one backend.
    """

    def __init__(
        self,
        backend: Backend | None = None,
        replay_root: Path | None = None,
        transcripts_root: Path | None = None,
        record: bool = False,
        clock: Clock | None = None,
        max_calls: int = DEFAULT_MAX_CALLS,
    ) -> None:
        if backend is None and replay_root is None:
            raise ValueError("need a backend or a replay root")
        self._backend = backend
        self._replay_root = replay_root
        self._transcripts_root = transcripts_root
        self._record = record and transcripts_root is not None
        self._clock = clock or Clock()
        self.budget = CallBudget(max_calls)
        self._counters: dict[tuple[str, str], int] = {}
        self._lock = threading.Lock()

    @property
    def deterministic(self) -> bool:
        if self._replay_root is not None:
            return True
        return bool(self._backend and self._backend.deterministic)

    @property
    def clock(self) -> Clock:
        return self._clock

    def session(self, pipeline: str, node: str) -> GatewaySession:
        with self._lock:
            key = (pipeline, node)
            index = self._counters.get(key, 0)
            self._counters[key] = index + 1

        relative = Path(pipeline) / node / f"{index}.jsonl"
        if self._replay_root is not None:
            backend: Backend = ReplayBackend(self._replay_root / relative)
        else:
            assert self._backend is not None
            backend = self._backend

        recorder = None
        if self._record and self._transcripts_root is not None:
            recorder = TranscriptRecorder(self._transcripts_root / relative, self._clock)
        return GatewaySession(backend, self.budget, recorder)
