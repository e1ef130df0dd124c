"""Single-agent execution loop: reason, act, observe, finish with structure.

The model may interleave Thought steps (an identity tool) with real tool
calls; a decision node maps each completion to a directive. Runs always
terminate: total completions are capped, consecutive Thought actions are
capped, and the final answer must arrive through the registered response
schema or the run fails with diagnostics.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .core_model import METRIC_NAMES, Verdict
from .errors import SchemaViolationError, StepCapExceededError
from .llm_gateway import CompletionRequest, CompletionResponse, GatewaySession
from .prompt_engine import (
    ActionOutcome,
    AncillaryText,
    PromptTemplate,
    assemble,
    render_template,
)
from .toolbox import THOUGHT_TOOL, ToolRegistry

log = logging.getLogger(__name__)

DEFAULT_THOUGHT_CAP = 3
DEFAULT_STEP_CAP = 12
SCHEMA_RETRY_LIMIT = 2

EXECUTE_TOOL = "execute_tool"
ACCEPT_FINAL = "accept_final"
REFUSE_THOUGHT = "refuse_thought"
FAIL = "fail"

REFUSAL_TOOL_NAME = "thought_refusal"
NUDGE_TOOL_NAME = "format_nudge"

EVALUATOR_ROLES = ("evaluation", "final_eval", "review")


@dataclass(frozen=True)
class FieldSpec:
    """One response-schema field: value kind plus whether it may be omitted."""

    kind: str
    required: bool = True


@dataclass(frozen=True)
class ResponseSchema:
    """Declares the shape of an agent's forced final answer."""

    schema_id: str
    description: str
    fields: Mapping[str, FieldSpec]

    def tool_schema(self) -> dict[str, Any]:
        properties: dict[str, Any] = {}
        for name, spec in self.fields.items():
            properties[name] = _JSON_KINDS[spec.kind]
        return {
            "name": self.schema_id,
            "description": self.description,
            "parameters": {
                "type": "object",
                "properties": properties,
                "required": sorted(
                    name for name, spec in self.fields.items() if spec.required
                ),
            },
        }

    def validate(
        self, payload: Mapping[str, Any]
    ) -> tuple[dict[str, Any], list[str], list[str]]:
        """Return (cleaned payload, problems, warnings); extras are dropped."""
        cleaned: dict[str, Any] = {}
        problems: list[str] = []
        warnings: list[str] = []
        for name, spec in self.fields.items():
            if name not in payload:
                if spec.required:
                    problems.append(f"missing field: {name}")
                continue
            value, issue = _coerce(name, payload[name], spec.kind)
            if issue:
                problems.append(issue)
            else:
                cleaned[name] = value
        for name in payload:
            if name not in self.fields:
                warnings.append(f"dropped unknown field: {name}")
        return cleaned, problems, warnings


_JSON_KINDS: dict[str, dict[str, Any]] = {
    "text": {"type": "string"},
    "text_list": {"type": "array", "items": {"type": "string"}},
    "bool": {"type": "boolean"},
    "flag_map": {"type": "object", "additionalProperties": {"type": "boolean"}},
    "module_list": {
        "type": "array",
        "items": {
            "type": "object",
            "properties": {
                "name": {"type": "string"},
                "description": {"type": "string"},
                "connections": {"type": "array", "items": {"type": "string"}},
                "ports": {"type": "array", "items": {"type": "string"}},
                "template": {"type": "string"},
            },
            "required": ["name", "description", "connections", "ports", "template"],
        },
    },
}

_MODULE_FIELDS = {
    "name": "text",
    "description": "text",
    "connections": "text_list",
    "ports": "text_list",
    "template": "text",
}


def _coerce(name: str, value: Any, kind: str) -> tuple[Any, str]:
    if kind == "text":
        if not isinstance(value, str):
            return None, f"field {name} must be text"
        return value, ""
    if kind == "text_list":
        if not isinstance(value, (list, tuple)) or any(
            not isinstance(item, str) for item in value
        ):
            return None, f"field {name} must be a list of text"
        return list(value), ""
    if kind == "bool":
        if not isinstance(value, bool):
            return None, f"field {name} must be a boolean"
        return value, ""
    if kind == "flag_map":
        if not isinstance(value, Mapping):
            return None, f"field {name} must be a mapping"
        out: dict[str, bool] = {}
        for key, flag in value.items():
            if key not in METRIC_NAMES:
                return None, f"field {name} has unknown metric {key!r}"
            if not isinstance(flag, bool):
                return None, f"field {name}[{key!r}] must be a boolean"
            out[str(key)] = flag
        return out, ""
    if kind == "module_list":
        if not isinstance(value, (list, tuple)):
            return None, f"field {name} must be a list of module objects"
        modules: list[dict[str, Any]] = []
        for i, item in enumerate(value):
            if not isinstance(item, Mapping):
                return None, f"{name}[{i}] must be an object"
            module: dict[str, Any] = {}
            for fname, fkind in _MODULE_FIELDS.items():
                if fname not in item:
                    return None, f"{name}[{i}] missing field: {fname}"
                coerced, issue = _coerce(f"{name}[{i}].{fname}", item[fname], fkind)
                if issue:
                    return None, issue
                module[fname] = coerced
            modules.append(module)
        return modules, ""
    raise ValueError(f"unknown field kind {kind!r}")


def builtin_schemas() -> dict[str, ResponseSchema]:
    return {
        schema.schema_id: schema
        for schema in (
            ResponseSchema(
                "CodeModuleResponse",
                "Deliver one finished module: code, header, and testbench.",
                {
                    "name": FieldSpec("text"),
                    "description": FieldSpec("text"),
                    "connections": FieldSpec("text_list"),
                    "ports": FieldSpec("text_list"),
                    "module_code": FieldSpec("text"),
                    "header_file": FieldSpec("text"),
                    "test_bench_code": FieldSpec("text"),
                },
            ),
            ResponseSchema(
                "SystemDesignResponse",
                "Deliver the full system plan as a list of module entries.",
                {"modules": FieldSpec("module_list")},
            ),
            ResponseSchema(
                "VerdictResponse",
                "Judge the draft and give actionable feedback.",
                {
                    "satisfactory": FieldSpec("bool"),
                    "feedback": FieldSpec("text", required=False),
                    "metric_flags": FieldSpec("flag_map", required=False),
                },
            ),
            ResponseSchema(
                "TextResponse",
                "Deliver the final text.",
                {"text": FieldSpec("text")},
            ),
            ResponseSchema(
                "QuestionListResponse",
                "Deliver the list of questions to research.",
                {"questions": FieldSpec("text_list")},
            ),
        )
    }


SCHEMAS = builtin_schemas()


@dataclass(frozen=True)
class StructuredResponse:
    schema_id: str
    payload: Mapping[str, Any]


@dataclass(frozen=True)
class AgentConfig:
    role_tag: str
    allowed_tools: tuple[str, ...] = ()
    thought_cap: int = DEFAULT_THOUGHT_CAP
    step_cap: int = DEFAULT_STEP_CAP
    response_schema: str = "TextResponse"
    model_role: str = ""

    def __post_init__(self) -> None:
        if self.thought_cap < 1:
            raise ValueError("thought_cap must be >= 1")
        if self.step_cap < self.thought_cap + 1:
            raise ValueError("step_cap must be >= thought_cap + 1")
        if self.response_schema not in SCHEMAS:
            raise ValueError(f"unknown response schema {self.response_schema!r}")

    def effective_model_role(self) -> str:
        if self.model_role:
            return self.model_role
        return "evaluator" if self.role_tag in EVALUATOR_ROLES else "generator"


@dataclass
class AgentState:
    iteration: int = 0
    outcomes: list[ActionOutcome] = field(default_factory=list)
    consecutive_thoughts: int = 0
    ancillary: AncillaryText | None = None


def step(
    config: AgentConfig, state: AgentState, response: CompletionResponse
) -> str:
    """Decision node: map one completion to the next loop directive."""
    if response.kind != "tool_call":
        return FAIL
    if response.tool_name == config.response_schema:
        return ACCEPT_FINAL
    if response.tool_name == THOUGHT_TOOL:
        if state.consecutive_thoughts >= config.thought_cap:
            return REFUSE_THOUGHT
        return EXECUTE_TOOL
    if response.tool_name in config.allowed_tools:
        return EXECUTE_TOOL
    return FAIL


def enforce_schema(raw: CompletionResponse, schema_id: str) -> StructuredResponse:
    """Validate a final tool call against its schema; problems are fatal here.

    The retry choreography (corrective ancillary, bounded rounds) lives in
    run_agent; this is the single-shot check it repeats.
    """
    schema = SCHEMAS[schema_id]
    if raw.kind != "tool_call" or raw.tool_name != schema_id:
        raise SchemaViolationError(schema_id, ["response is not the required tool call"])
    cleaned, problems, warnings = schema.validate(raw.arguments)
    for warning in warnings:
        log.warning("%s: %s", schema_id, warning)
    if problems:
        raise SchemaViolationError(schema_id, problems)
    return StructuredResponse(schema_id=schema_id, payload=cleaned)


@dataclass(frozen=True)
class AgentRunResult:
    response: StructuredResponse
    outcomes: tuple[ActionOutcome, ...]
    completions: int
    transcript_path: str = ""


def _stringify_args(arguments: Mapping[str, Any]) -> dict[str, str]:
    out: dict[str, str] = {}
    for key, value in arguments.items():
        out[str(key)] = value if isinstance(value, str) else json.dumps(value)
    return out


def run_agent(
    config: AgentConfig,
    task_input: str,
    tools: ToolRegistry,
    session: GatewaySession,
    template: PromptTemplate,
    bindings: Mapping[str, str] | None = None,
    ancillary: AncillaryText | None = None,
    max_prompt_chars: int | None = None,
) -> AgentRunResult:
    """Drive one agent to a schema-valid final answer or a capped failure."""
    all_bindings = {"task": task_input}
    all_bindings.update(bindings or {})
    rendered = render_template(template, all_bindings)

    schema_tool = SCHEMAS[config.response_schema].tool_schema()
    tool_schemas = []
    if THOUGHT_TOOL in tools:
        tool_schemas.extend(tools.schemas([THOUGHT_TOOL]))
    tool_schemas.extend(
        tools.schemas([name for name in config.allowed_tools if name != THOUGHT_TOOL])
    )
    tool_schemas.append(schema_tool)

    state = AgentState(ancillary=ancillary)
    schema_retries = 0
    completions = 0
    assemble_kwargs = {}
    if max_prompt_chars is not None:
        assemble_kwargs["max_chars"] = max_prompt_chars

    while completions < config.step_cap:
        prompt = assemble(
            rendered, state.outcomes, state.ancillary, **assemble_kwargs
        )
        request = CompletionRequest(
            model_role=config.effective_model_role(),
            messages=(("system", prompt.text),),
            tool_schemas=tuple(tool_schemas),
        )
        response = session.complete(request)
        completions += 1
        state.iteration += 1

        directive = step(config, state, response)
        if directive == ACCEPT_FINAL:
            try:
                structured = enforce_schema(response, config.response_schema)
            except SchemaViolationError as exc:
                if schema_retries >= SCHEMA_RETRY_LIMIT:
                    raise
                schema_retries += 1
                state.ancillary = AncillaryText(
                    body=(
                        "RESPONSE FORMAT ERROR: "
                        + "; ".join(exc.problems)
                        + f". Call {config.response_schema} again with every "
                        "required field."
                    ),
                    origin="schema_check",
                )
                continue
            return AgentRunResult(
                response=structured,
                outcomes=tuple(state.outcomes),
                completions=completions,
                transcript_path=str(session.transcript_path or ""),
            )

        if directive == EXECUTE_TOOL:
            output = tools.dispatch(response.tool_name, response.arguments)
            state.outcomes.append(
                ActionOutcome(
                    step_index=len(state.outcomes),
                    tool_name=response.tool_name,
                    arguments=_stringify_args(response.arguments),
                    output=output,
                )
            )
            if response.tool_name == THOUGHT_TOOL:
                state.consecutive_thoughts += 1
            else:
                state.consecutive_thoughts = 0
        elif directive == REFUSE_THOUGHT:
            state.outcomes.append(
                ActionOutcome(
                    step_index=len(state.outcomes),
                    tool_name=REFUSAL_TOOL_NAME,
                    arguments={},
                    output=(
                        f"Thought refused: {config.thought_cap} consecutive "
                        "reasoning steps already taken. Take an action or "
                        f"finish with {config.response_schema}."
                    ),
                )
            )
        else:
            state.outcomes.append(
                ActionOutcome(
                    step_index=len(state.outcomes),
                    tool_name=NUDGE_TOOL_NAME,
                    arguments={},
                    output=(
                        "FORMAT ERROR: reply by calling one of the offered "
                        f"tools; deliver the final answer with "
                        f"{config.response_schema}."
                    ),
                )
            )

    raise StepCapExceededError(
        f"agent for role {config.role_tag!r} hit step cap {config.step_cap} "
        "without a final response",
        exchanges=list(state.outcomes),
    )


def request_verdict(session: GatewaySession, prompt_text: str) -> Verdict:
    """Ask the evaluator for a structured verdict; one re-ask, then a
    free-text reply is taken as unsatisfactory with that text as feedback."""
    schema = SCHEMAS["VerdictResponse"]
    tool_schemas = (schema.tool_schema(),)

    def ask(text: str) -> CompletionResponse:
        return session.complete(
            CompletionRequest(
                model_role="evaluator",
                messages=(("system", text),),
                tool_schemas=tool_schemas,
            )
        )

    response = ask(prompt_text)
    verdict = _parse_verdict(schema, response)
    if verdict is not None:
        return verdict

    nudge = AncillaryText(
        body=(
            "VERDICT FORMAT ERROR: reply by calling VerdictResponse with a "
            "boolean 'satisfactory' and 'feedback' text."
        ),
        origin="verdict_check",
    )
    response = ask(prompt_text + nudge.block())
    verdict = _parse_verdict(schema, response)
    if verdict is not None:
        return verdict
    feedback = response.text if response.kind == "text" else json.dumps(
        response.to_dict()
    )
    return Verdict(satisfactory=False, feedback=feedback)


def _parse_verdict(
    schema: ResponseSchema, response: CompletionResponse
) -> Verdict | None:
    if response.kind != "tool_call" or response.tool_name != schema.schema_id:
        return None
    cleaned, problems, warnings = schema.validate(response.arguments)
    for warning in warnings:
        log.warning("VerdictResponse: %s", warning)
    if problems:
        return None
    return Verdict(
        satisfactory=bool(cleaned["satisfactory"]),
        feedback=str(cleaned.get("feedback", "")),
        metric_flags=cleaned.get("metric_flags", {}),
    )


def request_text(
    session: GatewaySession, prompt_text: str, model_role: str = "generator"
) -> str:
    """Ask for one piece of text; accepts the TextResponse tool or plain text,
    nudging once before giving up with an empty string."""
    schema = SCHEMAS["TextResponse"]
    tool_schemas = (schema.tool_schema(),)

    def ask(text: str) -> CompletionResponse:
        return session.complete(
            CompletionRequest(
                model_role=model_role,
                messages=(("system", text),),
                tool_schemas=tool_schemas,
            )
        )

    for attempt in range(2):
        response = ask(
            prompt_text
            if attempt == 0
            else prompt_text
            + AncillaryText(
                body="FORMAT ERROR: reply with the TextResponse tool.",
                origin="text_check",
            ).block()
        )
        if response.kind == "text" and response.text.strip():
            return response.text
        if response.kind == "tool_call" and response.tool_name == schema.schema_id:
            cleaned, problems, _ = schema.validate(response.arguments)
            if not problems:
                return str(cleaned["text"])
    return ""
