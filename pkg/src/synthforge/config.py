"""Workspace layout and strict configuration parsing.

The config file is YAML with a closed key set at every level: an unknown key
is an error naming that key, so typos never silently fall back to defaults.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .core_model import DesignObjectives
from .design_checks import ToolHook
from .errors import ConfigError
from .llm_gateway import ModelRoster, ModelSpec

log = logging.getLogger(__name__)

DEFAULT_ENDPOINT = "https://api.openai.com"
DEFAULT_TEMPLATES = Path(__file__).parent / "default_templates"


@dataclass(frozen=True)
class Workspace:
    """Fixed directory layout every command operates on."""

    root: Path

    @property
    def objectives_path(self) -> Path:
        return self.root / "objectives.yaml"

    @property
    def config_path(self) -> Path:
        return self.root / "config.yaml"

    @property
    def knowledge_dir(self) -> Path:
        return self.root / "knowledge"

    @property
    def sources_dir(self) -> Path:
        return self.knowledge_dir / "sources"

    @property
    def index_dir(self) -> Path:
        return self.knowledge_dir / "index"

    @property
    def review_path(self) -> Path:
        return self.knowledge_dir / "literature_review.md"

    @property
    def design_dir(self) -> Path:
        return self.root / "design"

    @property
    def trials_dir(self) -> Path:
        return self.design_dir / "trials"

    @property
    def best_dir(self) -> Path:
        return self.design_dir / "best"

    @property
    def transcripts_dir(self) -> Path:
        return self.root / "transcripts"

    @property
    def templates_dir(self) -> Path:
        return self.root / "templates"

    @property
    def lock_path(self) -> Path:
        return self.root / ".lock"

    def scaffold(self) -> None:
        for directory in (
            self.sources_dir,
            self.index_dir,
            self.trials_dir,
            self.best_dir,
            self.transcripts_dir,
            self.templates_dir,
        ):
            directory.mkdir(parents=True, exist_ok=True)


def load_objectives(path: Path) -> DesignObjectives:
    if not path.is_file():
        raise ConfigError(f"objectives file not found: {path}")
    raw = yaml.safe_load(path.read_text("utf-8"))
    if not isinstance(raw, Mapping):
        raise ConfigError(f"objectives file is not a mapping: {path}")
    _reject_unknown(raw, {"project_name", "goals", "requirements"}, "objectives")
    try:
        return DesignObjectives.from_mapping(raw)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _reject_unknown(raw: Mapping[str, Any], allowed: set[str], where: str) -> None:
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"unknown config key {key!r} in {where}")


@dataclass(frozen=True)
class SearchSettings:
    provider: str = "fixture"
    fixtures_path: str = ""
    endpoint: str = ""
    api_key_env: str = ""
    max_results: int = 5


@dataclass(frozen=True)
class ToolSettings:
    interpreter: tuple[str, ...] = ()
    search: SearchSettings = field(default_factory=SearchSettings)
    syntax_hook: str = ""
    synth_hook: str = ""
    exec_timeout_s: float = 10.0


@dataclass(frozen=True)
class CapSettings:
    thought_cap: int = 3
    step_cap: int = 12
    eval_cap: int = 5
    design_eval_cap: int = 3
    final_eval_cap: int = 3
    max_calls: int = 500


@dataclass(frozen=True)
class RagSettings:
    chunk_size: int = 1000
    overlap: int = 200
    retrieval_k: int = 5
    dimension: int = 256
    threshold: float = 0.25


@dataclass(frozen=True)
class WorkspaceConfig:
    """Everything the CLI needs to wire the pipelines together."""

    roster: ModelRoster
    endpoint: str = DEFAULT_ENDPOINT
    backend: str = "http"
    script_path: str = ""
    templates_dir: str = ""
    tools: ToolSettings = field(default_factory=ToolSettings)
    caps: CapSettings = field(default_factory=CapSettings)
    rag: RagSettings = field(default_factory=RagSettings)
    trials: int = 5
    optimization_requested: bool = False

    def __post_init__(self) -> None:
        if self.backend not in ("http", "scripted"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.backend == "scripted" and not self.script_path:
            raise ConfigError("scripted backend requires script_path")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")

    def resolve_templates_dir(self, workspace: Workspace) -> Path:
        if self.templates_dir:
            path = Path(self.templates_dir)
            if not path.is_absolute():
                path = workspace.root / path
            return path
        local = workspace.templates_dir
        if local.is_dir() and any(local.iterdir()):
            return local
        return DEFAULT_TEMPLATES

    def syntax_hook(self) -> ToolHook | None:
        if not self.tools.syntax_hook:
            return None
        return ToolHook.from_string(self.tools.syntax_hook)

    def synth_hook(self) -> ToolHook | None:
        if not self.tools.synth_hook:
            return None
        return ToolHook.from_string(self.tools.synth_hook)


def default_config() -> WorkspaceConfig:
    return WorkspaceConfig(
        roster=ModelRoster(
            generator_model=ModelSpec(model_id="generator-default"),
            evaluator_model=ModelSpec(model_id="evaluator-default"),
        )
    )


def load_config(path: Path) -> WorkspaceConfig:
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw = yaml.safe_load(path.read_text("utf-8")) or {}
    if not isinstance(raw, Mapping):
        raise ConfigError(f"config file is not a mapping: {path}")
    return parse_config(raw)


def parse_config(raw: Mapping[str, Any]) -> WorkspaceConfig:
    _reject_unknown(
        raw,
        {
            "models",
            "backend",
            "script_path",
            "templates_dir",
            "tools",
            "caps",
            "rag",
            "trials",
            "optimization_requested",
        },
        "config",
    )
    models = raw.get("models", {}) or {}
    _reject_unknown(models, {"endpoint", "generator", "evaluator"}, "models")
    endpoint = str(models.get("endpoint", DEFAULT_ENDPOINT))
    roster = ModelRoster(
        generator_model=_model_spec(models.get("generator", {}) or {}, "generator"),
        evaluator_model=_model_spec(models.get("evaluator", {}) or {}, "evaluator"),
    )

    tools_raw = raw.get("tools", {}) or {}
    _reject_unknown(
        tools_raw,
        {"interpreter", "search", "syntax_hook", "synth_hook", "exec_timeout_s"},
        "tools",
    )
    search_raw = tools_raw.get("search", {}) or {}
    _reject_unknown(
        search_raw,
        {"provider", "fixtures_path", "endpoint", "api_key_env", "max_results"},
        "tools.search",
    )
    interpreter = tools_raw.get("interpreter", ())
    if isinstance(interpreter, str):
        interpreter = (interpreter,)
    tools = ToolSettings(
        interpreter=tuple(str(part) for part in interpreter),
        search=SearchSettings(
            provider=str(search_raw.get("provider", "fixture")),
            fixtures_path=str(search_raw.get("fixtures_path", "")),
            endpoint=str(search_raw.get("endpoint", "")),
            api_key_env=str(search_raw.get("api_key_env", "")),
            max_results=int(search_raw.get("max_results", 5)),
        ),
        syntax_hook=str(tools_raw.get("syntax_hook", "")),
        synth_hook=str(tools_raw.get("synth_hook", "")),
        exec_timeout_s=float(tools_raw.get("exec_timeout_s", 10.0)),
    )

    caps_raw = raw.get("caps", {}) or {}
    _reject_unknown(
        caps_raw,
        {
            "thought_cap",
            "step_cap",
            "eval_cap",
            "design_eval_cap",
            "final_eval_cap",
            "max_calls",
        },
        "caps",
    )
    caps = CapSettings(
        thought_cap=int(caps_raw.get("thought_cap", 3)),
        step_cap=int(caps_raw.get("step_cap", 12)),
        eval_cap=int(caps_raw.get("eval_cap", 5)),
        design_eval_cap=int(caps_raw.get("design_eval_cap", 3)),
        final_eval_cap=int(caps_raw.get("final_eval_cap", 3)),
        max_calls=int(caps_raw.get("max_calls", 500)),
    )

    rag_raw = raw.get("rag", {}) or {}
    _reject_unknown(
        rag_raw,
        {"chunk_size", "overlap", "retrieval_k", "dimension", "threshold"},
        "rag",
    )
    rag = RagSettings(
        chunk_size=int(rag_raw.get("chunk_size", 1000)),
        overlap=int(rag_raw.get("overlap", 200)),
        retrieval_k=int(rag_raw.get("retrieval_k", 5)),
        dimension=int(rag_raw.get("dimension", 256)),
        threshold=float(rag_raw.get("threshold", 0.25)),
    )

    return WorkspaceConfig(
        roster=roster,
        endpoint=endpoint,
        backend=str(raw.get("backend", "http")),
        script_path=str(raw.get("script_path", "")),
        templates_dir=str(raw.get("templates_dir", "")),
        tools=tools,
        caps=caps,
        rag=rag,
        trials=int(raw.get("trials", 5)),
        optimization_requested=bool(raw.get("optimization_requested", False)),
    )


def _model_spec(raw: Mapping[str, Any], which: str) -> ModelSpec:
    _reject_unknown(
        raw, {"model_id", "temperature", "max_output_tokens"}, f"models.{which}"
    )
    return ModelSpec(
        model_id=str(raw.get("model_id", f"{which}-default")),
        temperature=float(raw.get("temperature", 0.0)),
        max_output_tokens=int(raw.get("max_output_tokens", 4096)),
    )


def search_api_key(settings: SearchSettings) -> str:
    if settings.api_key_env:
        return os.environ.get(settings.api_key_env, "")
    return ""
