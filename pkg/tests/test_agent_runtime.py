"""Agent loop: directives, caps, schema enforcement, and prompt growth."""

from __future__ import annotations

import pytest

import testkit
from synthforge.agent_runtime import (
    SCHEMAS,
    AgentConfig,
    AgentState,
    enforce_schema,
    run_agent,
    step,
)
from synthforge.errors import SchemaViolationError, StepCapExceededError
from synthforge.prompt_engine import parse_observation_blocks
from synthforge.toolbox import ToolRegistry, ToolSignature


def config(**overrides):
    base = dict(role_tag="generation", response_schema="TextResponse")
    base.update(overrides)
    return AgentConfig(**base)


def run(responses, cfg=None, tools=None, transcripts_root=None, **kwargs):
    factory = testkit.scripted_factory(responses, transcripts_root=transcripts_root)
    session = factory.session("test", "agent")
    try:
        return run_agent(
            cfg or config(),
            task_input="the task",
            tools=tools if tools is not None else testkit.thought_registry(),
            session=session,
            template=testkit.mini_template("generation"),
            **kwargs,
        )
    finally:
        session.close()


class TestStepDirectives:
    def test_final_schema_tool_accepts(self):
        directive = step(config(), AgentState(), testkit.tool("TextResponse", text="x"))
        assert directive == "accept_final"

    def test_plain_text_fails(self):
        assert step(config(), AgentState(), testkit.text("prose")) == "fail"

    def test_unknown_tool_fails(self):
        assert step(config(), AgentState(), testkit.tool("mystery")) == "fail"

    def test_allowed_tool_executes(self):
        cfg = config(allowed_tools=("search_web",))
        assert step(cfg, AgentState(), testkit.tool("search_web", query="q")) == (
            "execute_tool"
        )

    def test_thought_respects_cap(self):
        cfg = config(thought_cap=2)
        state = AgentState(consecutive_thoughts=1)
        assert step(cfg, state, testkit.tool("Thought", text="t")) == "execute_tool"
        state.consecutive_thoughts = 2
        assert step(cfg, state, testkit.tool("Thought", text="t")) == "refuse_thought"


class TestAgentConfig:
    def test_bounds(self):
        with pytest.raises(ValueError):
            config(thought_cap=0)
        with pytest.raises(ValueError):
            config(thought_cap=5, step_cap=5)
        with pytest.raises(ValueError):
            config(response_schema="NotASchema")

    def test_model_role_defaults_by_role_tag(self):
        assert config(role_tag="generation").effective_model_role() == "generator"
        assert config(role_tag="final_eval").effective_model_role() == "evaluator"
        assert config(model_role="evaluator").effective_model_role() == "evaluator"


class TestRunAgent:
    def test_direct_final_answer(self):
        result = run([testkit.tool("TextResponse", text="done")])
        assert result.response.payload == {"text": "done"}
        assert result.completions == 1
        assert result.outcomes == ()

    def test_thought_then_final(self):
        result = run(
            [
                testkit.tool("Thought", text="thinking"),
                testkit.tool("TextResponse", text="done"),
            ]
        )
        assert result.completions == 2
        assert [o.tool_name for o in result.outcomes] == ["Thought"]
        assert result.outcomes[0].output == "thinking"

    def test_tool_execution_feeds_observation(self):
        registry = testkit.thought_registry()
        registry.register(
            ToolSignature("echo_tool", "echo", {"x": ("string", "value")}),
            lambda args: f"echo={args['x']}",
        )
        result = run(
            [
                testkit.tool("echo_tool", x="42"),
                testkit.tool("TextResponse", text="done"),
            ],
            cfg=config(allowed_tools=("echo_tool",)),
            tools=registry,
        )
        assert result.outcomes[0].output == "echo=42"

    def test_thought_cap_inserts_refusal_and_counter_stays(self):
        responses = [testkit.tool("Thought", text=f"t{i}") for i in range(5)]
        responses.append(testkit.tool("TextResponse", text="done"))
        result = run(responses, cfg=config(thought_cap=3))
        names = [o.tool_name for o in result.outcomes]
        assert names == [
            "Thought",
            "Thought",
            "Thought",
            "thought_refusal",
            "thought_refusal",
        ]

    def test_plain_text_gets_format_nudge(self):
        result = run(
            [testkit.text("just prose"), testkit.tool("TextResponse", text="ok")]
        )
        assert [o.tool_name for o in result.outcomes] == ["format_nudge"]
        assert "FORMAT ERROR" in result.outcomes[0].output

    def test_step_cap_raises_with_exchanges(self):
        with pytest.raises(StepCapExceededError) as excinfo:
            run([testkit.text("noise")] * 4, cfg=config(step_cap=4))
        assert len(excinfo.value.exchanges) == 4

    def test_schema_retry_then_success(self):
        result = run(
            [
                testkit.tool("TextResponse", wrong_field="x"),
                testkit.tool("TextResponse", text="fixed"),
            ]
        )
        assert result.response.payload == {"text": "fixed"}
        assert result.completions == 2

    def test_schema_retries_exhaust_after_two(self):
        bad = testkit.tool("TextResponse", wrong="x")
        with pytest.raises(SchemaViolationError):
            run([bad, bad, bad])

    def test_prompts_grow_by_observation_blocks(self, tmp_path):
        run(
            [
                testkit.tool("Thought", text="a"),
                testkit.tool("Thought", text="b"),
                testkit.tool("TextResponse", text="done"),
            ],
            transcripts_root=tmp_path,
        )
        from synthforge.llm_gateway import load_transcript

        entries = load_transcript(tmp_path / "test" / "agent" / "0.jsonl")
        prompts = [e.request.messages[0][1] for e in entries]
        assert prompts[1].startswith(prompts[0])
        assert prompts[2].startswith(prompts[1])
        assert parse_observation_blocks(prompts[2]) == [(0, "Thought"), (1, "Thought")]

    def test_schema_ancillary_not_carried_after_acceptance_path(self, tmp_path):
        run(
            [
                testkit.tool("TextResponse", wrong="x"),
                testkit.tool("TextResponse", text="ok"),
            ],
            transcripts_root=tmp_path,
        )
        from synthforge.llm_gateway import load_transcript

        entries = load_transcript(tmp_path / "test" / "agent" / "0.jsonl")
        retry_prompt = entries[1].request.messages[0][1]
        assert "[ANCILLARY | schema_check]" in retry_prompt
        assert "RESPONSE FORMAT ERROR" in retry_prompt

    def test_offered_tools_are_thought_allowed_then_schema(self, tmp_path):
        registry = testkit.thought_registry()
        registry.register(
            ToolSignature("aux", "aux tool", {"x": ("string", "v")}),
            lambda args: "out",
        )
        run(
            [testkit.tool("TextResponse", text="done")],
            cfg=config(allowed_tools=("aux",)),
            tools=registry,
            transcripts_root=tmp_path,
        )
        from synthforge.llm_gateway import load_transcript

        entries = load_transcript(tmp_path / "test" / "agent" / "0.jsonl")
        names = [schema["name"] for schema in entries[0].request.tool_schemas]
        assert names == ["Thought", "aux", "TextResponse"]


class TestSchemas:
    def test_enforce_schema_cleans_and_validates(self):
        structured = enforce_schema(
            testkit.tool("VerdictResponse", satisfactory=True, extra="dropped"),
            "VerdictResponse",
        )
        assert structured.payload == {"satisfactory": True}

    def test_enforce_schema_reports_problems(self):
        with pytest.raises(SchemaViolationError) as excinfo:
            enforce_schema(testkit.tool("VerdictResponse"), "VerdictResponse")
        assert "missing field: satisfactory" in excinfo.value.problems

    def test_module_list_kind_validates_items(self):
        schema = SCHEMAS["SystemDesignResponse"]
        cleaned, problems, _ = schema.validate(
            {
                "modules": [
                    {
                        "name": "a",
                        "description": "d",
                        "connections": [],
                        "ports": [],
                        "template": "t",
                    }
                ]
            }
        )
        assert not problems
        assert cleaned["modules"][0]["name"] == "a"
        _, problems, _ = schema.validate({"modules": [{"name": "a"}]})
        assert problems

    def test_code_module_schema_requires_all_fields(self):
        schema = SCHEMAS["CodeModuleResponse"]
        _, problems, _ = schema.validate({"name": "m"})
        assert len(problems) == 6

    def test_tool_schema_shape(self):
        shape = SCHEMAS["TextResponse"].tool_schema()
        assert shape["name"] == "TextResponse"
        assert shape["parameters"]["required"] == ["text"]
