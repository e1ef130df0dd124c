"""Actions available to agents: web search, sandboxed code execution,
knowledge retrieval, and the identity Thought action.

Every tool is total from the agent's point of view: failures come back as
observation text prefixed ``TOOL ERROR:`` so the loop can react, never as an
exception out of dispatch.
"""

from __future__ import annotations

import json
import logging
import shutil
import subprocess
import sys
import tempfile
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import requests

from .errors import DuplicateToolError, InterpreterNotFoundError
from .util import truncate_output

log = logging.getLogger(__name__)

DEFAULT_MAX_RESULTS = 5
OUTPUT_CAP_BYTES = 65536

THOUGHT_TOOL = "Thought"
SEARCH_TOOL = "search_web"
PYTHON_TOOL = "python_run"
RETRIEVE_TOOL = "retrieve_knowledge"


@dataclass(frozen=True)
class ToolSignature:
    """What the model sees: name, purpose, and typed parameters."""

    name: str
    description: str
    parameters: Mapping[str, tuple[str, str]] = field(default_factory=dict)

    def schema(self) -> dict[str, Any]:
        """JSON-schema shape used on the completion wire."""
        properties = {
            pname: {"type": type_tag, "description": pdesc}
            for pname, (type_tag, pdesc) in self.parameters.items()
        }
        return {
            "name": self.name,
            "description": self.description,
            "parameters": {
                "type": "object",
                "properties": properties,
                "required": sorted(properties),
            },
        }


@dataclass(frozen=True)
class SearchResult:
    title: str
    snippet: str
    locator: str

    def __post_init__(self) -> None:
        if not self.locator:
            raise ValueError("locator must be nonempty")


@dataclass(frozen=True)
class ExecResult:
    stdout: str
    stderr: str
    exit_code: int
    timed_out: bool = False

    def __post_init__(self) -> None:
        if self.timed_out and self.exit_code != -1:
            raise ValueError("timed_out implies exit_code -1")


class SearchProvider:
    """Interface: (query, max_results) -> ordered results."""

    def search(self, query: str, max_results: int) -> list[SearchResult]:
        raise NotImplementedError


class FixtureSearchProvider(SearchProvider):
    """Serves canned results from a key -> results JSON file (or mapping)."""

    def __init__(self, fixtures: Mapping[str, Sequence[Mapping[str, str]]]) -> None:
        self._fixtures = {
            key: [
                SearchResult(
                    title=str(item.get("title", "")),
                    snippet=str(item.get("snippet", "")),
                    locator=str(item.get("locator", "")),
                )
                for item in items
            ]
            for key, items in fixtures.items()
        }

    @classmethod
    def from_file(cls, path: Path) -> "FixtureSearchProvider":
        return cls(json.loads(path.read_text("utf-8")))

    def search(self, query: str, max_results: int) -> list[SearchResult]:
        hits = self._fixtures.get(query)
        if hits is None:
            log.warning("no search fixture for query %r", query)
            return []
        return list(hits[:max_results])


class HttpSearchProvider(SearchProvider):
    """Adapter for a JSON search API returning {results: [{title, snippet, url}]}."""

    def __init__(
        self,
        endpoint: str,
        api_key: str = "",
        session: requests.Session | None = None,
    ) -> None:
        self._endpoint = endpoint
        self._api_key = api_key
        self._session = session or requests.Session()

    def search(self, query: str, max_results: int) -> list[SearchResult]:
        headers = {}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        try:
            reply = self._session.get(
                self._endpoint,
                params={"q": query, "count": max_results},
                headers=headers,
                timeout=30,
            )
            reply.raise_for_status()
            body = reply.json()
        except (requests.RequestException, ValueError) as exc:
            log.warning("web search failed for %r: %s", query, exc)
            return []
        results = []
        for item in body.get("results", [])[:max_results]:
            locator = str(item.get("url", "") or item.get("locator", ""))
            if not locator:
                continue
            results.append(
                SearchResult(
                    title=str(item.get("title", "")),
                    snippet=str(item.get("snippet", "")),
                    locator=locator,
                )
            )
        return results


def search_web(
    provider: SearchProvider, query: str, max_results: int = DEFAULT_MAX_RESULTS
) -> list[SearchResult]:
    """Run one search; provider failures degrade to an empty result list."""
    try:
        return provider.search(query, max_results)[:max_results]
    except Exception as exc:
        log.warning("search provider raised for %r: %s", query, exc)
        return []


@dataclass(frozen=True)
class CodeInterpreter:
    """Interpreter command used for sandboxed execution."""

    command: tuple[str, ...] = (sys.executable,)


def exec_code(
    source: str,
    timeout_s: float = 10.0,
    interpreter: CodeInterpreter | None = None,
    base_dir: Path | None = None,
    keep_scratch: bool = False,
) -> ExecResult:
    """Run source in a scratch directory with a scrubbed environment.

    The process is wall-clock bounded; each stream is capped at 64 KiB with a
    truncation marker. OS-level isolation is a deployment concern; this layer
    provides directory and environment containment only.
    """
    interpreter = interpreter or CodeInterpreter()
    binary = interpreter.command[0]
    if shutil.which(binary) is None and not Path(binary).exists():
        raise InterpreterNotFoundError(f"interpreter not found: {binary}")

    if base_dir is not None:
        base_dir.mkdir(parents=True, exist_ok=True)
        scratch = Path(tempfile.mkdtemp(prefix="exec-", dir=base_dir))
    else:
        scratch = Path(tempfile.mkdtemp(prefix="synthforge-exec-"))

    script = scratch / f"snippet_{uuid.uuid4().hex[:8]}.py"
    script.write_text(source, encoding="utf-8")
    env = {
        "PATH": "/usr/local/bin:/usr/bin:/bin",
        "HOME": str(scratch),
        "LANG": "C.UTF-8",
        "PYTHONIOENCODING": "utf-8",
    }
    try:
        proc = subprocess.run(
            [*interpreter.command, str(script)],
            cwd=scratch,
            env=env,
            capture_output=True,
            text=True,
            timeout=timeout_s,
        )
        result = ExecResult(
            stdout=truncate_output(proc.stdout, OUTPUT_CAP_BYTES),
            stderr=truncate_output(proc.stderr, OUTPUT_CAP_BYTES),
            exit_code=proc.returncode,
        )
    except subprocess.TimeoutExpired as exc:
        result = ExecResult(
            stdout=truncate_output(_decode(exc.output), OUTPUT_CAP_BYTES),
            stderr=truncate_output(_decode(exc.stderr), OUTPUT_CAP_BYTES),
            exit_code=-1,
            timed_out=True,
        )
    finally:
        if not keep_scratch:
            shutil.rmtree(scratch, ignore_errors=True)
    return result


def _decode(raw: bytes | str | None) -> str:
    if raw is None:
        return ""
    if isinstance(raw, bytes):
        return raw.decode("utf-8", errors="replace")
    return raw


ToolImpl = Callable[[Mapping[str, Any]], str]


class ToolRegistry:
    """Name-keyed dispatch table handed to each agent run."""

    def __init__(self) -> None:
        self._signatures: dict[str, ToolSignature] = {}
        self._impls: dict[str, ToolImpl] = {}

    def register(self, signature: ToolSignature, implementation: ToolImpl) -> None:
        if signature.name in self._signatures:
            raise DuplicateToolError(f"tool {signature.name!r} already registered")
        self._signatures[signature.name] = signature
        self._impls[signature.name] = implementation

    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self._signatures))

    def __contains__(self, name: str) -> bool:
        return name in self._signatures

    def schemas(self, names: Sequence[str]) -> tuple[dict[str, Any], ...]:
        return tuple(
            self._signatures[name].schema() for name in names if name in self._signatures
        )

    def dispatch(self, name: str, arguments: Mapping[str, Any]) -> str:
        """Run a tool; every failure becomes observation text, never a raise."""
        impl = self._impls.get(name)
        if impl is None:
            return f"TOOL ERROR: unknown tool {name!r}"
        try:
            return impl(arguments)
        except Exception as exc:
            log.warning("tool %s failed: %s", name, exc)
            return f"TOOL ERROR: {exc}"


def thought_signature() -> ToolSignature:
    return ToolSignature(
        name=THOUGHT_TOOL,
        description=(
            "Write down one step of reasoning before acting. "
            "The text is echoed back to you unchanged."
        ),
        parameters={"text": ("string", "the reasoning step")},
    )


def make_thought_tool() -> ToolImpl:
    def run(arguments: Mapping[str, Any]) -> str:
        return str(arguments.get("text", ""))

    return run


def search_signature() -> ToolSignature:
    return ToolSignature(
        name=SEARCH_TOOL,
        description="Search the web and return titled results with links.",
        parameters={"query": ("string", "search query")},
    )


def format_search_results(results: Sequence[SearchResult], query: str = "") -> str:
    if not results:
        return f"WARNING: no results for query {query!r}"
    lines = [
        f"{i + 1}. {hit.title} ({hit.locator})\n   {hit.snippet}"
        for i, hit in enumerate(results)
    ]
    return "\n".join(lines)


def make_search_tool(
    provider: SearchProvider, max_results: int = DEFAULT_MAX_RESULTS
) -> ToolImpl:
    def run(arguments: Mapping[str, Any]) -> str:
        query = str(arguments.get("query", ""))
        return format_search_results(search_web(provider, query, max_results), query)

    return run


def python_signature() -> ToolSignature:
    return ToolSignature(
        name=PYTHON_TOOL,
        description="Execute a Python snippet in a sandbox and return its output.",
        parameters={"source": ("string", "Python source to run")},
    )


def make_python_tool(
    interpreter: CodeInterpreter | None = None,
    timeout_s: float = 10.0,
    base_dir: Path | None = None,
) -> ToolImpl:
    def run(arguments: Mapping[str, Any]) -> str:
        source = str(arguments.get("source", ""))
        result = exec_code(
            source, timeout_s=timeout_s, interpreter=interpreter, base_dir=base_dir
        )
        if result.timed_out:
            return f"TOOL ERROR: execution timed out after {timeout_s}s"
        parts = []
        if result.stdout:
            parts.append(result.stdout.rstrip("\n"))
        if result.stderr:
            parts.append("STDERR:\n" + result.stderr.rstrip("\n"))
        parts.append(f"exit code: {result.exit_code}")
        return "\n".join(parts)

    return run


def retrieve_signature() -> ToolSignature:
    return ToolSignature(
        name=RETRIEVE_TOOL,
        description="Look up passages from the indexed knowledge base.",
        parameters={"query": ("string", "what to look up")},
    )


def make_retrieve_tool(query_fn: Callable[[str], str]) -> ToolImpl:
    """query_fn renders store hits to text; kept injectable to avoid coupling."""

    def run(arguments: Mapping[str, Any]) -> str:
        return query_fn(str(arguments.get("query", "")))

    return run
