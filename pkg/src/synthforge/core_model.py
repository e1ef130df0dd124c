"""Domain types shared by every pipeline stage, plus structural validation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from .util import is_identifier, read_json, write_json

log = logging.getLogger(__name__)

METRIC_NAMES = (
    "system_design",
    "syntax",
    "interface",
    "completeness",
    "optimization",
    "synthesizable",
)


@dataclass(frozen=True)
class DesignObjectives:
    """Root input of both pipelines: what to build and under which rules."""

    goals: tuple[str, ...]
    requirements: tuple[str, ...]
    project_name: str

    def __post_init__(self) -> None:
        if not self.goals:
            raise ValueError("goals must be nonempty")
        if not self.requirements:
            raise ValueError("requirements must be nonempty")
        if not is_identifier(self.project_name):
            raise ValueError(f"project_name is not an identifier: {self.project_name!r}")

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> "DesignObjectives":
        return cls(
            goals=tuple(str(item) for item in raw.get("goals", ())),
            requirements=tuple(str(item) for item in raw.get("requirements", ())),
            project_name=str(raw.get("project_name", "")),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "goals": list(self.goals),
            "requirements": list(self.requirements),
            "project_name": self.project_name,
        }


@dataclass(frozen=True)
class ModuleSpec:
    """One planned module: identity, purpose, wiring, ports, code skeleton.

    depends_on is an optional extension: when present across a graph and
    acyclic, module ordering honors it as a topological constraint.
    """

    name: str
    description: str
    connections: tuple[str, ...]
    ports: tuple[str, ...]
    template: str
    depends_on: tuple[str, ...] = ()

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> "ModuleSpec":
        return cls(
            name=str(raw.get("name", "")),
            description=str(raw.get("description", "")),
            connections=tuple(str(item) for item in raw.get("connections", ())),
            ports=tuple(str(item) for item in raw.get("ports", ())),
            template=str(raw.get("template", "")),
            depends_on=tuple(str(item) for item in raw.get("depends_on", ())),
        )

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "name": self.name,
            "description": self.description,
            "connections": list(self.connections),
            "ports": list(self.ports),
            "template": self.template,
        }
        if self.depends_on:
            out["depends_on"] = list(self.depends_on)
        return out


@dataclass(frozen=True)
class SystemDesignGraph:
    """The system-level plan: the full set of modules and their wiring."""

    modules: tuple[ModuleSpec, ...]

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> "SystemDesignGraph":
        return cls(
            modules=tuple(
                ModuleSpec.from_mapping(item) for item in raw.get("modules", ())
            )
        )

    def to_dict(self) -> dict[str, Any]:
        return {"modules": [module.to_dict() for module in self.modules]}

    def module_names(self) -> tuple[str, ...]:
        return tuple(module.name for module in self.modules)

    def find(self, name: str) -> ModuleSpec | None:
        for module in self.modules:
            if module.name == name:
                return module
        return None

    @classmethod
    def load(cls, path: Path) -> "SystemDesignGraph":
        return cls.from_mapping(read_json(path))

    def save(self, path: Path) -> None:
        write_json(path, self.to_dict())


@dataclass(frozen=True)
class ModuleArtifact:
    """A finished module: implementation, header, and testbench texts."""

    name: str
    description: str
    connections: tuple[str, ...]
    ports: tuple[str, ...]
    module_code: str
    header_file: str
    test_bench_code: str

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> "ModuleArtifact":
        return cls(
            name=str(raw.get("name", "")),
            description=str(raw.get("description", "")),
            connections=tuple(str(item) for item in raw.get("connections", ())),
            ports=tuple(str(item) for item in raw.get("ports", ())),
            module_code=str(raw.get("module_code", "")),
            header_file=str(raw.get("header_file", "")),
            test_bench_code=str(raw.get("test_bench_code", "")),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "description": self.description,
            "connections": list(self.connections),
            "ports": list(self.ports),
            "module_code": self.module_code,
            "header_file": self.header_file,
            "test_bench_code": self.test_bench_code,
        }


@dataclass(frozen=True)
class Verdict:
    """An evaluator's judgement of a draft, with actionable feedback."""

    satisfactory: bool
    feedback: str = ""
    metric_flags: Mapping[str, bool] = field(default_factory=dict)

    def __post_init__(self) -> None:
        unknown = set(self.metric_flags) - set(METRIC_NAMES)
        if unknown:
            raise ValueError(f"unknown metric names: {sorted(unknown)}")

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> "Verdict":
        flags = raw.get("metric_flags", {}) or {}
        return cls(
            satisfactory=bool(raw.get("satisfactory", False)),
            feedback=str(raw.get("feedback", "")),
            metric_flags={str(key): bool(val) for key, val in flags.items()},
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "satisfactory": self.satisfactory,
            "feedback": self.feedback,
            "metric_flags": dict(self.metric_flags),
        }


@dataclass(frozen=True)
class LiteratureReview:
    """Synthesized background document plus the sources it drew on."""

    body: str
    sources: tuple[tuple[str, str], ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "body": self.body,
            "sources": [list(pair) for pair in self.sources],
        }

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> "LiteratureReview":
        return cls(
            body=str(raw.get("body", "")),
            sources=tuple(
                (str(pair[0]), str(pair[1])) for pair in raw.get("sources", ())
            ),
        )


@dataclass(frozen=True)
class Violation:
    """One broken structural rule, tied to the module it concerns."""

    rule: str
    module: str
    detail: str = ""

    def to_dict(self) -> dict[str, str]:
        return {"rule": self.rule, "module": self.module, "detail": self.detail}


def validate_system_design(graph: SystemDesignGraph) -> list[Violation]:
    """Check every structural invariant; violations are data, not failures."""
    violations: list[Violation] = []
    if not graph.modules:
        violations.append(Violation("empty-graph", "", "graph has no modules"))
        return violations

    names = [module.name for module in graph.modules]
    seen: set[str] = set()
    for name in names:
        if name in seen:
            violations.append(
                Violation("duplicate-name", name, "module name appears more than once")
            )
        seen.add(name)

    known = set(names)
    for module in graph.modules:
        if not is_identifier(module.name):
            violations.append(
                Violation("bad-name", module.name, "name is not an identifier")
            )
        if not module.template:
            violations.append(
                Violation("empty-template", module.name, "template text is empty")
            )
        for target in module.connections:
            if target == module.name:
                violations.append(
                    Violation("self-connection", module.name, "module connects to itself")
                )
            elif target not in known:
                violations.append(
                    Violation(
                        "dangling-connection",
                        module.name,
                        f"connection targets unknown module {target!r}",
                    )
                )
    return violations


def validate_module_artifact(
    artifact: ModuleArtifact, spec: ModuleSpec
) -> list[Violation]:
    """Flag empty code/header/testbench fields and name drift against the plan."""
    violations: list[Violation] = []
    if artifact.name != spec.name:
        violations.append(
            Violation(
                "name-mismatch",
                artifact.name,
                f"artifact named {artifact.name!r} but planned as {spec.name!r}",
            )
        )
    if not artifact.module_code.strip():
        violations.append(Violation("missing-code", artifact.name, "module_code is empty"))
    if not artifact.header_file.strip():
        violations.append(
            Violation("missing-header", artifact.name, "header_file is empty")
        )
    if not artifact.test_bench_code.strip():
        violations.append(
            Violation("missing-testbench", artifact.name, "test_bench_code is empty")
        )
    return violations
