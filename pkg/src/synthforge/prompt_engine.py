"""Prompt templates and cumulative augmentation.

Every request an agent sends is built the same way: pick the template for the
node's role, substitute slot bindings, then append each prior action outcome
as a delimited observation block, then any ancillary text from the controlling
node. Appending one more outcome to an already assembled prompt yields the
same text as assembling from scratch, which lets agent loops grow prompts
incrementally.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .errors import PromptTooLongError, TemplateError

ROLE_TAGS = (
    "question_gen",
    "generation",
    "evaluation",
    "review",
    "system_design",
    "module_design",
    "integration",
    "final_eval",
    "redesign",
)

_SLOT_RE = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")
_OBS_OPEN_RE = re.compile(r"^\[OBSERVATION (\d+) \| ([A-Za-z_][A-Za-z0-9_]*)\]$")

DEFAULT_MAX_PROMPT_CHARS = 200_000


@dataclass(frozen=True)
class PromptTemplate:
    """A named prompt body with {slot} markers, bound to one agent role."""

    id: str
    body: str
    role_tag: str

    def __post_init__(self) -> None:
        if self.role_tag not in ROLE_TAGS:
            raise TemplateError(f"unknown role_tag {self.role_tag!r}")

    def slots(self) -> tuple[str, ...]:
        seen: list[str] = []
        for match in _SLOT_RE.finditer(self.body):
            name = match.group(1)
            if name not in seen:
                seen.append(name)
        return tuple(seen)


@dataclass(frozen=True)
class ActionOutcome:
    """The recorded result of one agent step: which tool ran and what it said."""

    step_index: int
    tool_name: str
    arguments: Mapping[str, str] = field(default_factory=dict)
    output: str = ""

    def block(self) -> str:
        return (
            f"\n[OBSERVATION {self.step_index} | {self.tool_name}]\n"
            f"{self.output}\n[/OBSERVATION]\n"
        )


@dataclass(frozen=True)
class AncillaryText:
    """Extra guidance injected by the node controlling the agent."""

    body: str
    origin: str

    def block(self) -> str:
        return f"\n[ANCILLARY | {self.origin}]\n{self.body}\n[/ANCILLARY]\n"


@dataclass(frozen=True)
class AssembledPrompt:
    """Final prompt text plus the ordered record of what went into it."""

    text: str
    provenance: tuple[tuple[str, str], ...]


class TemplateSet:
    """Role-keyed template registry; exactly one template per role."""

    def __init__(self) -> None:
        self._by_role: dict[str, PromptTemplate] = {}

    def register(self, template: PromptTemplate) -> None:
        if template.role_tag in self._by_role:
            raise TemplateError(
                f"role {template.role_tag!r} already has template "
                f"{self._by_role[template.role_tag].id!r}"
            )
        self._by_role[template.role_tag] = template

    def roles(self) -> tuple[str, ...]:
        return tuple(sorted(self._by_role))

    def __contains__(self, role_tag: str) -> bool:
        return role_tag in self._by_role

    @classmethod
    def load_dir(cls, directory: Path) -> "TemplateSet":
        """Read one UTF-8 file per role from directory; filename = role_tag."""
        templates = cls()
        if not directory.is_dir():
            raise TemplateError(f"template directory not found: {directory}")
        for entry in sorted(directory.iterdir()):
            if entry.is_dir() or entry.name.startswith("."):
                continue
            role = entry.stem if entry.suffix == ".txt" else entry.name
            if role not in ROLE_TAGS:
                raise TemplateError(f"file {entry.name!r} does not name a role")
            templates.register(
                PromptTemplate(id=role, body=entry.read_text("utf-8"), role_tag=role)
            )
        return templates


def select_template(templates: TemplateSet, role_tag: str) -> PromptTemplate:
    try:
        return templates._by_role[role_tag]
    except KeyError:
        raise TemplateError(f"no template registered for role {role_tag!r}") from None


def render_template(template: PromptTemplate, bindings: Mapping[str, str]) -> str:
    """Substitute every slot; unknown or missing slots are hard errors."""
    missing = [slot for slot in template.slots() if slot not in bindings]
    if missing:
        raise TemplateError(
            f"template {template.id!r} missing bindings: {', '.join(missing)}"
        )

    def replace(match: re.Match[str]) -> str:
        return str(bindings[match.group(1)])

    return _SLOT_RE.sub(replace, template.body)


def assemble(
    template_text: str,
    outcomes: Sequence[ActionOutcome] = (),
    ancillary: AncillaryText | None = None,
    max_chars: int = DEFAULT_MAX_PROMPT_CHARS,
) -> AssembledPrompt:
    """Concatenate template, observation blocks in step order, then ancillary."""
    indices = [outcome.step_index for outcome in outcomes]
    if indices != sorted(indices) or len(set(indices)) != len(indices):
        raise TemplateError(f"outcomes not sorted by step_index: {indices}")

    parts = [template_text]
    provenance: list[tuple[str, str]] = [("template", "template")]
    for outcome in outcomes:
        parts.append(outcome.block())
        provenance.append(("observation", f"{outcome.step_index}:{outcome.tool_name}"))
    if ancillary is not None:
        parts.append(ancillary.block())
        provenance.append(("ancillary", ancillary.origin))

    text = "".join(parts)
    if len(text) > max_chars:
        raise PromptTooLongError(
            f"assembled prompt is {len(text)} chars (limit {max_chars})"
        )
    return AssembledPrompt(text=text, provenance=tuple(provenance))


def parse_observation_blocks(text: str) -> list[tuple[int, str]]:
    """Recover (step_index, tool_name) for each observation block, in order."""
    found: list[tuple[int, str]] = []
    for line in text.splitlines():
        match = _OBS_OPEN_RE.match(line)
        if match:
            found.append((int(match.group(1)), match.group(2)))
    return found
