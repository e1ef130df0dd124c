"""Generic decision-graph executor used by both pipelines.

Nodes are typed (agent, function, decision, terminal) and return an outcome
label; execution follows the edge matching that label until a terminal node
or a visit cap halts it. Caps make every loop finite no matter how handlers
behave, and the trace records enough to audit any run after the fact.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from .errors import GraphDefinitionError, GraphExecutionError
from .util import Clock, write_json

log = logging.getLogger(__name__)

NODE_KINDS = ("agent", "function", "decision", "terminal")
DEFAULT_LABEL = "ok"
TERMINAL_LABEL = "end"
GLOBAL_STEP_CAP = 100


@dataclass
class PipelineState:
    """Shared blackboard the nodes read and mutate, plus visit accounting."""

    data: dict[str, Any] = field(default_factory=dict)
    visit_counts: dict[str, int] = field(default_factory=dict)

    def get(self, key: str, default: Any = None) -> Any:
        return self.data.get(key, default)

    def __getitem__(self, key: str) -> Any:
        return self.data[key]

    def __setitem__(self, key: str, value: Any) -> None:
        self.data[key] = value

    def __contains__(self, key: str) -> bool:
        return key in self.data


Handler = Callable[[PipelineState], str | None]


@dataclass(frozen=True)
class NodeDef:
    id: str
    kind: str
    handler: Handler | None = None

    def __post_init__(self) -> None:
        if self.kind not in NODE_KINDS:
            raise GraphDefinitionError(f"node {self.id!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class EdgeDef:
    source: str
    label: str
    target: str


@dataclass(frozen=True)
class GraphViolation:
    rule: str
    subject: str
    detail: str = ""


@dataclass(frozen=True)
class DecisionGraph:
    name: str
    nodes: tuple[NodeDef, ...]
    edges: tuple[EdgeDef, ...]
    start: str

    def node(self, node_id: str) -> NodeDef:
        for node in self.nodes:
            if node.id == node_id:
                return node
        raise GraphDefinitionError(f"no node {node_id!r} in graph {self.name!r}")

    def edge_map(self) -> dict[tuple[str, str], str]:
        return {(edge.source, edge.label): edge.target for edge in self.edges}


def validate_graph(graph: DecisionGraph) -> list[GraphViolation]:
    """Flag structural problems; an empty list means the graph is runnable."""
    violations: list[GraphViolation] = []
    ids = [node.id for node in graph.nodes]
    seen: set[str] = set()
    for node_id in ids:
        if node_id in seen:
            violations.append(GraphViolation("duplicate-node", node_id))
        seen.add(node_id)

    known = set(ids)
    if graph.start not in known:
        violations.append(GraphViolation("missing-start", graph.start))
    if not any(node.kind == "terminal" for node in graph.nodes):
        violations.append(GraphViolation("no-terminal", graph.name))

    edge_keys: set[tuple[str, str]] = set()
    for edge in graph.edges:
        if (edge.source, edge.label) in edge_keys:
            violations.append(
                GraphViolation(
                    "duplicate-edge", edge.source, f"label {edge.label!r} declared twice"
                )
            )
        edge_keys.add((edge.source, edge.label))
        for endpoint in (edge.source, edge.target):
            if endpoint not in known:
                violations.append(
                    GraphViolation("dangling-edge", endpoint, "edge endpoint undeclared")
                )

    outgoing: dict[str, set[str]] = {}
    for edge in graph.edges:
        outgoing.setdefault(edge.source, set()).add(edge.label)
    for node in graph.nodes:
        labels = outgoing.get(node.id, set())
        if node.kind == "decision" and len(labels) < 2:
            violations.append(
                GraphViolation(
                    "missing-label",
                    node.id,
                    "decision node needs at least two outcome edges",
                )
            )
        if node.kind != "terminal" and not labels:
            violations.append(
                GraphViolation("dead-end", node.id, "non-terminal node has no edges")
            )

    if graph.start in known:
        reachable = {graph.start}
        frontier = [graph.start]
        adjacency: dict[str, list[str]] = {}
        for edge in graph.edges:
            adjacency.setdefault(edge.source, []).append(edge.target)
        while frontier:
            current = frontier.pop()
            for nxt in adjacency.get(current, ()):
                if nxt in known and nxt not in reachable:
                    reachable.add(nxt)
                    frontier.append(nxt)
        for node_id in ids:
            if node_id not in reachable:
                violations.append(GraphViolation("unreachable", node_id))
    return violations


@dataclass(frozen=True)
class TraceStep:
    node_id: str
    timestamp: str
    label: str

    def to_dict(self) -> dict[str, str]:
        return {"node_id": self.node_id, "timestamp": self.timestamp, "label": self.label}


@dataclass(frozen=True)
class ExecutionResult:
    state: PipelineState
    trace: tuple[TraceStep, ...]
    completed: bool
    halt_reason: str

    def visits(self, node_id: str) -> int:
        return sum(1 for step in self.trace if step.node_id == node_id)


def execute(
    graph: DecisionGraph,
    initial_state: PipelineState | None = None,
    node_caps: Mapping[str, int] | None = None,
    global_cap: int = GLOBAL_STEP_CAP,
    clock: Clock | None = None,
) -> ExecutionResult:
    """Run the graph from its start node until terminal or a cap.

    Cap breaches are not exceptions: the partial state comes back flagged
    non-terminal so pipelines can salvage whatever was produced.
    """
    problems = validate_graph(graph)
    if problems:
        raise GraphDefinitionError(
            f"graph {graph.name!r} invalid: "
            + "; ".join(f"{v.rule}({v.subject})" for v in problems)
        )
    state = initial_state or PipelineState()
    caps = dict(node_caps or {})
    clock = clock or Clock()
    edges = graph.edge_map()
    trace: list[TraceStep] = []

    current = graph.node(graph.start)
    while True:
        if len(trace) >= global_cap:
            return ExecutionResult(state, tuple(trace), False, "global-cap")
        visits = state.visit_counts.get(current.id, 0) + 1
        cap = caps.get(current.id)
        if cap is not None and visits > cap:
            return ExecutionResult(state, tuple(trace), False, "node-cap")
        state.visit_counts[current.id] = visits

        label = None
        if current.handler is not None:
            label = current.handler(state)
        if label is None:
            label = TERMINAL_LABEL if current.kind == "terminal" else DEFAULT_LABEL
        trace.append(TraceStep(current.id, clock.timestamp(), label))

        if current.kind == "terminal":
            return ExecutionResult(state, tuple(trace), True, "terminal")

        target = edges.get((current.id, label))
        if target is None:
            raise GraphExecutionError(
                f"graph {graph.name!r}: node {current.id!r} produced label "
                f"{label!r} with no matching edge"
            )
        current = graph.node(target)


def trace_is_edge_valid(graph: DecisionGraph, trace: Sequence[TraceStep]) -> bool:
    """Post-hoc audit: every consecutive pair must be a declared edge."""
    edges = graph.edge_map()
    for prev, nxt in zip(trace, trace[1:]):
        if edges.get((prev.node_id, prev.label)) != nxt.node_id:
            return False
    return True


def export_trace(trace: Sequence[TraceStep], path: Path) -> None:
    write_json(path, [step.to_dict() for step in trace])
