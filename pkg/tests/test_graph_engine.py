"""Decision-graph engine: validation rules, execution, caps, trace audit."""

from __future__ import annotations

import json

import pytest

from synthforge.errors import GraphDefinitionError, GraphExecutionError
from synthforge.graph_engine import (
    DecisionGraph,
    EdgeDef,
    ExecutionResult,
    NodeDef,
    PipelineState,
    TraceStep,
    execute,
    export_trace,
    trace_is_edge_valid,
    validate_graph,
)
from synthforge.util import DeterministicClock


def linear_graph() -> DecisionGraph:
    def work(state: PipelineState) -> None:
        state["count"] = state.get("count", 0) + 1
        return None

    return DecisionGraph(
        name="linear",
        nodes=(
            NodeDef("a", "function", work),
            NodeDef("b", "function", work),
            NodeDef("done", "terminal"),
        ),
        edges=(EdgeDef("a", "ok", "b"), EdgeDef("b", "ok", "done")),
        start="a",
    )


def loop_graph(stop_after: int) -> DecisionGraph:
    def bump(state: PipelineState) -> None:
        state["laps"] = state.get("laps", 0) + 1
        return None

    def judge(state: PipelineState) -> str:
        return "exit" if state["laps"] >= stop_after else "again"

    return DecisionGraph(
        name="loop",
        nodes=(
            NodeDef("work", "function", bump),
            NodeDef("gate", "decision", judge),
            NodeDef("done", "terminal"),
        ),
        edges=(
            EdgeDef("work", "ok", "gate"),
            EdgeDef("gate", "again", "work"),
            EdgeDef("gate", "exit", "done"),
        ),
        start="work",
    )


class TestValidation:
    def test_clean_graph_has_no_violations(self):
        assert validate_graph(linear_graph()) == []
        assert validate_graph(loop_graph(2)) == []

    def test_duplicate_node(self):
        graph = DecisionGraph(
            "g",
            (NodeDef("a", "function"), NodeDef("a", "terminal"), NodeDef("end", "terminal")),
            (EdgeDef("a", "ok", "end"),),
            "a",
        )
        assert "duplicate-node" in {v.rule for v in validate_graph(graph)}

    def test_missing_start_and_no_terminal(self):
        graph = DecisionGraph("g", (NodeDef("a", "function"),), (EdgeDef("a", "ok", "a"),), "zz")
        rules = {v.rule for v in validate_graph(graph)}
        assert {"missing-start", "no-terminal"} <= rules

    def test_duplicate_edge_label(self):
        graph = DecisionGraph(
            "g",
            (NodeDef("a", "function"), NodeDef("end", "terminal")),
            (EdgeDef("a", "ok", "end"), EdgeDef("a", "ok", "end")),
            "a",
        )
        hits = [v for v in validate_graph(graph) if v.rule == "duplicate-edge"]
        assert hits and hits[0].subject == "a"

    def test_dangling_edge(self):
        graph = DecisionGraph(
            "g",
            (NodeDef("a", "function"), NodeDef("end", "terminal")),
            (EdgeDef("a", "ok", "ghost"), EdgeDef("a", "alt", "end")),
            "a",
        )
        assert {"dangling-edge"} <= {v.rule for v in validate_graph(graph)}

    def test_decision_needs_two_labels(self):
        graph = DecisionGraph(
            "g",
            (NodeDef("pick", "decision", lambda s: "only"), NodeDef("end", "terminal")),
            (EdgeDef("pick", "only", "end"),),
            "pick",
        )
        hits = [v for v in validate_graph(graph) if v.rule == "missing-label"]
        assert hits and hits[0].subject == "pick"

    def test_dead_end_and_unreachable(self):
        graph = DecisionGraph(
            "g",
            (
                NodeDef("a", "function"),
                NodeDef("stray", "function"),
                NodeDef("end", "terminal"),
            ),
            (EdgeDef("a", "ok", "end"), EdgeDef("stray", "ok", "end")),
            "a",
        )
        assert {"unreachable"} <= {v.rule for v in validate_graph(graph)}
        no_edges = DecisionGraph(
            "g",
            (NodeDef("a", "function"), NodeDef("end", "terminal")),
            (),
            "a",
        )
        assert "dead-end" in {v.rule for v in validate_graph(no_edges)}

    def test_unknown_node_kind_rejected_at_construction(self):
        with pytest.raises(GraphDefinitionError, match="unknown kind"):
            NodeDef("a", "oracle")


class TestExecution:
    def test_linear_run(self):
        result = execute(linear_graph(), clock=DeterministicClock())
        assert result.completed is True
        assert result.halt_reason == "terminal"
        assert [s.node_id for s in result.trace] == ["a", "b", "done"]
        assert result.state["count"] == 2
        assert result.trace[0].timestamp == "2024-01-01T00:00:00Z"

    def test_decision_loop_round_counts(self):
        result = execute(loop_graph(3))
        assert result.completed is True
        assert result.visits("work") == 3
        assert result.visits("gate") == 3
        labels = [s.label for s in result.trace if s.node_id == "gate"]
        assert labels == ["again", "again", "exit"]

    def test_invalid_graph_refused_before_running(self):
        graph = DecisionGraph("g", (NodeDef("a", "function"),), (), "a")
        with pytest.raises(GraphDefinitionError, match="invalid"):
            execute(graph)

    def test_missing_edge_for_label(self):
        graph = DecisionGraph(
            "g",
            (
                NodeDef("pick", "decision", lambda s: "surprise"),
                NodeDef("end", "terminal"),
            ),
            (EdgeDef("pick", "x", "end"), EdgeDef("pick", "y", "end")),
            "pick",
        )
        with pytest.raises(GraphExecutionError, match="'surprise'"):
            execute(graph)

    def test_node_cap_flags_partial_result(self):
        result = execute(loop_graph(99), node_caps={"gate": 4})
        assert result.completed is False
        assert result.halt_reason == "node-cap"
        assert result.visits("gate") == 4
        assert result.state["laps"] == 5

    def test_global_cap_flags_partial_result(self):
        result = execute(loop_graph(99), global_cap=10)
        assert result.completed is False
        assert result.halt_reason == "global-cap"
        assert len(result.trace) == 10

    def test_state_threads_through(self):
        state = PipelineState(data={"count": 40})
        result = execute(linear_graph(), initial_state=state)
        assert result.state is state
        assert state["count"] == 42


class TestTraceAudit:
    def test_real_trace_is_valid(self):
        result = execute(loop_graph(2))
        assert trace_is_edge_valid(loop_graph(2), result.trace) is True

    def test_corrupted_trace_is_invalid(self):
        graph = loop_graph(2)
        result = execute(graph)
        bad = list(result.trace)
        bad[0] = TraceStep(bad[0].node_id, bad[0].timestamp, "exit")
        assert trace_is_edge_valid(graph, bad) is False

    def test_export_trace(self, tmp_path):
        result = execute(linear_graph(), clock=DeterministicClock())
        path = tmp_path / "trace.json"
        export_trace(result.trace, path)
        raw = json.loads(path.read_text("utf-8"))
        assert raw[0] == {
            "node_id": "a",
            "timestamp": "2024-01-01T00:00:00Z",
            "label": "ok",
        }

    def test_visits_helper(self):
        result = ExecutionResult(
            PipelineState(),
            (
                TraceStep("x", "t", "ok"),
                TraceStep("y", "t", "ok"),
                TraceStep("x", "t", "ok"),
            ),
            True,
            "terminal",
        )
        assert result.visits("x") == 2
        assert result.visits("zz") == 0
