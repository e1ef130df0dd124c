"""Hardware design pipeline: plan the system, order the modules, code each
one with interface context from its predecessors, integrate, evaluate, emit.

The whole flow runs as one decision graph. The system plan passes through an
evaluation/redesign loop before any module is coded; integration and final
evaluation form a second bounded loop, after which files are written even if
the evaluator never approved (the manifest records that).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .agent_runtime import (
    AgentConfig,
    run_agent,
    request_verdict,
)
from .core_model import (
    DesignObjectives,
    ModuleArtifact,
    ModuleSpec,
    SystemDesignGraph,
    Verdict,
    validate_module_artifact,
    validate_system_design,
)
from .design_checks import (
    PLACEHOLDER_MARKER,
    CheckConfig,
    CheckSubject,
    render_report_table,
    report as run_checks,
)
from .errors import (
    DesignNotApprovedError,
    InvalidDesignError,
    ModuleDesignFailedError,
    SchemaViolationError,
    StepCapExceededError,
)
from .graph_engine import (
    DecisionGraph,
    EdgeDef,
    ExecutionResult,
    NodeDef,
    PipelineState,
    execute,
    export_trace,
)
from .llm_gateway import GatewayFactory
from .prompt_engine import AncillaryText, TemplateSet, assemble, render_template, select_template
from .toolbox import ToolRegistry
from .util import sha256_hex, write_json, write_text

log = logging.getLogger(__name__)

PIPELINE_NAME = "design"
DEFAULT_DESIGN_EVAL_CAP = 3
DEFAULT_FINAL_EVAL_CAP = 3
MODULE_DESIGN_TOOLS = ("search_web", "python_run", "retrieve_knowledge")


@dataclass(frozen=True)
class ModuleOrder:
    """A permutation of the graph's module names, cheapest interfaces first."""

    names: tuple[str, ...]

    def __iter__(self):
        return iter(self.names)

    def __len__(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class IntegratedDesign:
    """All module artifacts plus the distinguished top-level module."""

    artifacts: Mapping[str, ModuleArtifact]
    top_module: ModuleArtifact

    def subject(self, graph: SystemDesignGraph | None = None) -> CheckSubject:
        return CheckSubject(graph=graph, artifacts=dict(self.artifacts),
                            top=self.top_module)

    def placeholder_files(self) -> list[str]:
        hits: list[str] = []
        for entry in self.subject().files():
            if PLACEHOLDER_MARKER in entry.text:
                hits.append(entry.path)
        return hits


def module_degrees(graph: SystemDesignGraph) -> dict[str, int]:
    """Degree = size of the union of declared and received connections."""
    neighbors: dict[str, set[str]] = {m.name: set() for m in graph.modules}
    for module in graph.modules:
        for target in module.connections:
            if target == module.name or target not in neighbors:
                continue
            neighbors[module.name].add(target)
            neighbors[target].add(module.name)
    return {name: len(peers) for name, peers in neighbors.items()}


def order_modules(graph: SystemDesignGraph) -> ModuleOrder:
    """Ascending degree with lexicographic ties; honors acyclic depends_on.

    A cyclic depends_on annotation falls back to the pure degree order, so
    every graph admits an ordering.
    """
    degrees = module_degrees(graph)
    names = set(degrees)
    deps: dict[str, set[str]] = {
        module.name: {d for d in module.depends_on if d in names and d != module.name}
        for module in graph.modules
    }
    if any(deps.values()):
        ordered = _kahn_order(deps, degrees)
        if ordered is not None:
            return ModuleOrder(tuple(ordered))
        log.warning("depends_on annotations are cyclic; using degree order")
    ordered = sorted(names, key=lambda name: (degrees[name], name))
    return ModuleOrder(tuple(ordered))


def _kahn_order(
    deps: dict[str, set[str]], degrees: dict[str, int]
) -> list[str] | None:
    remaining = {name: set(targets) for name, targets in deps.items()}
    ordered: list[str] = []
    while remaining:
        ready = [name for name, targets in remaining.items() if not targets]
        if not ready:
            return None
        ready.sort(key=lambda name: (degrees[name], name))
        chosen = ready[0]
        ordered.append(chosen)
        del remaining[chosen]
        for targets in remaining.values():
            targets.discard(chosen)
    return ordered


def _graph_json(graph: SystemDesignGraph) -> str:
    return json.dumps(graph.to_dict(), indent=2, ensure_ascii=False)


def _artifact_from_payload(payload: Mapping[str, object]) -> ModuleArtifact:
    return ModuleArtifact(
        name=str(payload.get("name", "")),
        description=str(payload.get("description", "")),
        connections=tuple(str(c) for c in payload.get("connections", ())),
        ports=tuple(str(p) for p in payload.get("ports", ())),
        module_code=str(payload.get("module_code", "")),
        header_file=str(payload.get("header_file", "")),
        test_bench_code=str(payload.get("test_bench_code", "")),
    )


@dataclass(frozen=True)
class DesignRunResult:
    graph: SystemDesignGraph
    design: IntegratedDesign
    manifest: dict
    approved: bool
    trace: ExecutionResult


class DesignPipeline:
    """Owns the design decision graph and its agent nodes."""

    def __init__(
        self,
        factory: GatewayFactory,
        templates: TemplateSet,
        tools: ToolRegistry,
        design_eval_cap: int = DEFAULT_DESIGN_EVAL_CAP,
        final_eval_cap: int = DEFAULT_FINAL_EVAL_CAP,
        check_config: CheckConfig | None = None,
        module_step_cap: int = 12,
        thought_cap: int = 3,
    ) -> None:
        self.factory = factory
        self.templates = templates
        self.tools = tools
        self.design_eval_cap = design_eval_cap
        self.final_eval_cap = final_eval_cap
        self.check_config = check_config or CheckConfig()
        self.module_step_cap = module_step_cap
        self.thought_cap = thought_cap

    # -- system planning ------------------------------------------------------

    def system_design(
        self, objectives: DesignObjectives, review_text: str
    ) -> SystemDesignGraph:
        """Plan the module graph; one corrective re-ask on structural faults."""
        template = select_template(self.templates, "system_design")
        graph, violations = self._ask_for_design(
            template, objectives, review_text, ancillary=None
        )
        if graph is not None and not graph.modules:
            raise InvalidDesignError("system design has no modules")
        if violations:
            detail = "; ".join(
                f"{v.rule}({v.module})" + (f": {v.detail}" if v.detail else "")
                for v in violations
            )
            graph, violations = self._ask_for_design(
                template,
                objectives,
                review_text,
                ancillary=AncillaryText(
                    body=(
                        "Your previous plan broke structural rules: "
                        f"{detail}. Produce a corrected plan."
                    ),
                    origin="design_validation",
                ),
            )
            if graph is not None and not graph.modules:
                raise InvalidDesignError("system design has no modules")
            if violations:
                raise InvalidDesignError(
                    "system design still invalid after corrective re-ask: "
                    + "; ".join(f"{v.rule}({v.module})" for v in violations)
                )
        assert graph is not None
        return graph

    def _ask_for_design(
        self,
        template,
        objectives: DesignObjectives,
        review_text: str,
        ancillary: AncillaryText | None,
    ):
        session = self.factory.session(PIPELINE_NAME, "system_design")
        try:
            result = run_agent(
                AgentConfig(
                    role_tag="system_design",
                    response_schema="SystemDesignResponse",
                ),
                task_input=_objectives_text(objectives),
                tools=self.tools,
                session=session,
                template=template,
                bindings={"review": review_text or "(no review available)"},
                ancillary=ancillary,
            )
        finally:
            session.close()
        graph = SystemDesignGraph.from_mapping(result.response.payload)
        if not graph.modules:
            return graph, []
        return graph, validate_system_design(graph)

    def evaluate_design(
        self, graph: SystemDesignGraph, objectives: DesignObjectives
    ) -> Verdict:
        template = select_template(self.templates, "evaluation")
        prompt = assemble(
            render_template(
                template,
                {
                    "task": (
                        "Judge whether this module partition satisfies the "
                        "objectives.\n" + _objectives_text(objectives)
                    ),
                    "draft": _graph_json(graph),
                },
            )
        ).text
        session = self.factory.session(PIPELINE_NAME, "design_eval")
        try:
            return request_verdict(session, prompt)
        finally:
            session.close()

    def redesign(
        self,
        objectives: DesignObjectives,
        prior: SystemDesignGraph,
        feedback: str,
    ) -> SystemDesignGraph:
        """Revise the plan; evaluator feedback rides in verbatim as ancillary."""
        template = select_template(self.templates, "redesign")
        session = self.factory.session(PIPELINE_NAME, "redesign")
        try:
            result = run_agent(
                AgentConfig(
                    role_tag="redesign", response_schema="SystemDesignResponse"
                ),
                task_input=_objectives_text(objectives),
                tools=self.tools,
                session=session,
                template=template,
                bindings={"prior": _graph_json(prior)},
                ancillary=AncillaryText(body=feedback, origin="design_evaluator"),
            )
        finally:
            session.close()
        graph = SystemDesignGraph.from_mapping(result.response.payload)
        if not graph.modules:
            raise InvalidDesignError("redesign produced no modules")
        violations = validate_system_design(graph)
        if violations:
            raise InvalidDesignError(
                "redesign produced an invalid plan: "
                + "; ".join(f"{v.rule}({v.module})" for v in violations)
            )
        return graph

    # -- module coding ---------------------------------------------------------

    def design_module(
        self,
        spec: ModuleSpec,
        prior_artifacts: Sequence[ModuleArtifact],
        review_text: str = "",
    ) -> ModuleArtifact:
        """Code one module with the fixed interfaces of its predecessors."""
        template = select_template(self.templates, "module_design")
        context = _prior_context(prior_artifacts)
        task = _module_brief(spec)
        attempts = 0
        feedback = ""
        while True:
            attempts += 1
            body = context if not feedback else context + "\n" + feedback
            session = self.factory.session(PIPELINE_NAME, "module_design")
            try:
                result = run_agent(
                    AgentConfig(
                        role_tag="module_design",
                        allowed_tools=MODULE_DESIGN_TOOLS,
                        thought_cap=self.thought_cap,
                        step_cap=self.module_step_cap,
                        response_schema="CodeModuleResponse",
                    ),
                    task_input=task,
                    tools=self.tools,
                    session=session,
                    template=template,
                    ancillary=AncillaryText(body=body, origin="design_controller"),
                )
            except (SchemaViolationError, StepCapExceededError) as exc:
                raise ModuleDesignFailedError(spec.name, exc) from exc
            finally:
                session.close()
            artifact = _artifact_from_payload(result.response.payload)
            violations = validate_module_artifact(artifact, spec)
            if not violations:
                return artifact
            if attempts >= 2:
                raise ModuleDesignFailedError(
                    spec.name,
                    InvalidDesignError(
                        "artifact violations: "
                        + "; ".join(v.rule for v in violations)
                    ),
                )
            feedback = (
                "Your previous delivery was rejected: "
                + "; ".join(f"{v.rule} ({v.detail})" for v in violations)
                + ". Deliver the complete module again."
            )

    # -- integration and final evaluation ---------------------------------------

    def integrate(
        self,
        artifacts: Mapping[str, ModuleArtifact],
        graph: SystemDesignGraph,
        feedback: str = "",
    ) -> ModuleArtifact:
        template = select_template(self.templates, "integration")
        placeholder_notes = []
        for name in sorted(artifacts):
            artifact = artifacts[name]
            for kind, text in (
                ("code", artifact.module_code),
                ("header", artifact.header_file),
                ("testbench", artifact.test_bench_code),
            ):
                for lineno, line in enumerate(text.splitlines(), start=1):
                    if PLACEHOLDER_MARKER in line:
                        placeholder_notes.append(
                            f"- {name} {kind} line {lineno}: {line.strip()}"
                        )
        ancillary_parts = []
        if placeholder_notes:
            ancillary_parts.append(
                "Unresolved placeholders that must be completed:\n"
                + "\n".join(placeholder_notes)
            )
        if feedback:
            ancillary_parts.append(f"Evaluator feedback to address:\n{feedback}")
        if not ancillary_parts:
            ancillary_parts.append("No outstanding issues were flagged.")

        session = self.factory.session(PIPELINE_NAME, "integrate")
        try:
            result = run_agent(
                AgentConfig(
                    role_tag="integration", response_schema="CodeModuleResponse"
                ),
                task_input=_integration_brief(artifacts, graph),
                tools=self.tools,
                session=session,
                template=template,
                ancillary=AncillaryText(
                    body="\n\n".join(ancillary_parts), origin="integration_controller"
                ),
            )
        finally:
            session.close()
        return _artifact_from_payload(result.response.payload)

    def final_evaluate(
        self,
        design: IntegratedDesign,
        graph: SystemDesignGraph,
        objectives: DesignObjectives,
    ) -> Verdict:
        """Evaluator verdict informed by the mechanical check report."""
        template = select_template(self.templates, "final_eval")
        check_report = run_checks(design.subject(graph), self.check_config)
        prompt = assemble(
            render_template(
                template,
                {
                    "task": _objectives_text(objectives)
                    + "\nModules: "
                    + ", ".join(sorted(design.artifacts))
                    + f"\nTop module: {design.top_module.name}",
                    "draft": render_report_table(check_report),
                },
            )
        ).text
        session = self.factory.session(PIPELINE_NAME, "final_eval")
        try:
            return request_verdict(session, prompt)
        finally:
            session.close()

    # -- emission ---------------------------------------------------------------

    def emit_files(
        self,
        design: IntegratedDesign,
        design_dir: Path,
        approved: bool,
    ) -> dict:
        entries = design.subject().files()
        files = []
        for entry in entries:
            path = design_dir / entry.path
            write_text(path, entry.text)
            files.append(
                {"path": entry.path, "sha256": sha256_hex(entry.text)}
            )
        manifest = {
            "approved": approved,
            "module_count": len(design.artifacts),
            "top_module": design.top_module.name,
            "files": sorted(files, key=lambda item: item["path"]),
        }
        write_json(design_dir / "manifest.json", manifest)
        return manifest

    # -- the full decision graph -------------------------------------------------

    def build_graph(
        self,
        objectives: DesignObjectives,
        review_text: str,
        design_dir: Path,
    ) -> DecisionGraph:
        def node_system_design(state: PipelineState) -> None:
            state["graph"] = self.system_design(objectives, review_text)

        def node_design_eval(state: PipelineState) -> None:
            state["design_verdict"] = self.evaluate_design(state["graph"], objectives)
            state["design_evals"] = state.get("design_evals", 0) + 1

        def node_design_check(state: PipelineState) -> str:
            verdict: Verdict = state["design_verdict"]
            if verdict.satisfactory:
                return "approved"
            if state["design_evals"] >= self.design_eval_cap:
                return "abort"
            return "redesign"

        def node_redesign(state: PipelineState) -> None:
            verdict: Verdict = state["design_verdict"]
            state["graph"] = self.redesign(
                objectives, state["graph"], verdict.feedback
            )

        def node_aborted(state: PipelineState) -> None:
            state["aborted"] = "design-not-approved"

        def node_order(state: PipelineState) -> None:
            graph: SystemDesignGraph = state["graph"]
            graph.save(design_dir / "system_design.json")
            state["order"] = order_modules(graph)
            state["artifacts"] = {}
            state["next_index"] = 0

        def node_module_design(state: PipelineState) -> str:
            graph: SystemDesignGraph = state["graph"]
            order: ModuleOrder = state["order"]
            index: int = state["next_index"]
            name = order.names[index]
            spec = graph.find(name)
            assert spec is not None
            prior = [
                state["artifacts"][done] for done in order.names[:index]
            ]
            artifact = self.design_module(spec, prior, review_text)
            state["artifacts"][name] = artifact
            state["next_index"] = index + 1
            return "done" if state["next_index"] >= len(order) else "more"

        def node_integrate(state: PipelineState) -> None:
            state["top"] = self.integrate(
                state["artifacts"], state["graph"], state.get("final_feedback", "")
            )
            state["integrations"] = state.get("integrations", 0) + 1

        def node_final_eval(state: PipelineState) -> None:
            design = IntegratedDesign(
                artifacts=dict(state["artifacts"]), top_module=state["top"]
            )
            state["design"] = design
            verdict = self.final_evaluate(design, state["graph"], objectives)
            state["final_verdict"] = verdict
            state["final_feedback"] = verdict.feedback
            state["final_evals"] = state.get("final_evals", 0) + 1

        def node_final_check(state: PipelineState) -> str:
            verdict: Verdict = state["final_verdict"]
            if verdict.satisfactory:
                return "approved"
            if state["final_evals"] >= self.final_eval_cap:
                return "give_up"
            return "retry"

        def node_emit(state: PipelineState) -> None:
            verdict: Verdict = state["final_verdict"]
            state["approved"] = verdict.satisfactory
            state["manifest"] = self.emit_files(
                state["design"], design_dir, verdict.satisfactory
            )

        nodes = (
            NodeDef("system_design", "agent", node_system_design),
            NodeDef("design_eval", "agent", node_design_eval),
            NodeDef("design_check", "decision", node_design_check),
            NodeDef("redesign", "agent", node_redesign),
            NodeDef("aborted", "terminal", node_aborted),
            NodeDef("order", "function", node_order),
            NodeDef("module_design", "agent", node_module_design),
            NodeDef("integrate", "agent", node_integrate),
            NodeDef("final_eval", "agent", node_final_eval),
            NodeDef("final_check", "decision", node_final_check),
            NodeDef("emit", "function", node_emit),
            NodeDef("done", "terminal", None),
        )
        edges = (
            EdgeDef("system_design", "ok", "design_eval"),
            EdgeDef("design_eval", "ok", "design_check"),
            EdgeDef("design_check", "approved", "order"),
            EdgeDef("design_check", "redesign", "redesign"),
            EdgeDef("design_check", "abort", "aborted"),
            EdgeDef("redesign", "ok", "design_eval"),
            EdgeDef("order", "ok", "module_design"),
            EdgeDef("module_design", "more", "module_design"),
            EdgeDef("module_design", "done", "integrate"),
            EdgeDef("integrate", "ok", "final_eval"),
            EdgeDef("final_eval", "ok", "final_check"),
            EdgeDef("final_check", "approved", "emit"),
            EdgeDef("final_check", "retry", "integrate"),
            EdgeDef("final_check", "give_up", "emit"),
            EdgeDef("emit", "ok", "done"),
        )
        return DecisionGraph(
            name="design", nodes=nodes, edges=edges, start="system_design"
        )

    def run(
        self,
        objectives: DesignObjectives,
        review_text: str,
        design_dir: Path,
        traces_dir: Path | None = None,
    ) -> DesignRunResult:
        graph_def = self.build_graph(objectives, review_text, design_dir)
        state = PipelineState()
        try:
            result = execute(
                graph_def,
                state,
                node_caps={
                    "design_eval": self.design_eval_cap,
                    "redesign": self.design_eval_cap,
                    "module_design": 50,
                    "integrate": self.final_eval_cap,
                    "final_eval": self.final_eval_cap,
                    "final_check": self.final_eval_cap,
                },
                clock=self.factory.clock,
            )
        except ModuleDesignFailedError:
            self._preserve_partial(state, design_dir)
            raise
        if traces_dir is not None:
            export_trace(result.trace, traces_dir / "design_trace.json")
        if result.state.get("aborted"):
            graph: SystemDesignGraph = result.state["graph"]
            graph.save(design_dir / "system_design.json")
            verdict: Verdict = result.state["design_verdict"]
            raise DesignNotApprovedError(
                "system design was not approved after "
                f"{result.state['design_evals']} evaluations; last feedback: "
                f"{verdict.feedback}"
            )
        if not result.completed:
            raise DesignNotApprovedError(
                f"design run halted without finishing: {result.halt_reason}"
            )
        return DesignRunResult(
            graph=result.state["graph"],
            design=result.state["design"],
            manifest=result.state["manifest"],
            approved=bool(result.state.get("approved", False)),
            trace=result,
        )

    def _preserve_partial(self, state: PipelineState, design_dir: Path) -> None:
        """Write whatever finished before a module agent failed."""
        graph = state.get("graph")
        if isinstance(graph, SystemDesignGraph):
            graph.save(design_dir / "system_design.json")
        artifacts = state.get("artifacts") or {}
        for name, artifact in artifacts.items():
            base = design_dir / "modules" / name
            write_text(base / f"{name}.cpp", artifact.module_code)
            write_text(base / f"{name}.h", artifact.header_file)
            write_text(base / f"{name}_tb.cpp", artifact.test_bench_code)


def _objectives_text(objectives: DesignObjectives) -> str:
    lines = [f"Project: {objectives.project_name}", "Goals:"]
    lines.extend(f"- {goal}" for goal in objectives.goals)
    lines.append("Requirements:")
    lines.extend(f"- {req}" for req in objectives.requirements)
    return "\n".join(lines)


def _module_brief(spec: ModuleSpec) -> str:
    lines = [
        f"Module name: {spec.name}",
        f"Description: {spec.description}",
        "Connections: " + (", ".join(spec.connections) or "(none)"),
        "Ports:",
    ]
    lines.extend(f"- {port}" for port in spec.ports)
    lines.append("Code template:")
    lines.append(spec.template)
    return "\n".join(lines)


def _prior_context(prior: Sequence[ModuleArtifact]) -> str:
    if not prior:
        return "Interfaces fixed by earlier modules: none yet."
    lines = ["Interfaces fixed by earlier modules:"]
    for artifact in prior:
        lines.append(f"module {artifact.name}: {artifact.description}")
        lines.append("  ports:")
        lines.extend(f"  - {port}" for port in artifact.ports)
    return "\n".join(lines)


def _integration_brief(
    artifacts: Mapping[str, ModuleArtifact], graph: SystemDesignGraph
) -> str:
    lines = ["Connections:"]
    for module in graph.modules:
        lines.append(
            f"- {module.name} <-> " + (", ".join(module.connections) or "(none)")
        )
    for name in sorted(artifacts):
        artifact = artifacts[name]
        lines.append(f"\n=== module {name} ===")
        lines.append(f"--- {name}.h ---")
        lines.append(artifact.header_file)
        lines.append(f"--- {name}.cpp ---")
        lines.append(artifact.module_code)
    return "\n".join(lines)
