"""Knowledge-gathering pipeline: questions, retrieval-grounded answers with
an evaluation loop, and literature-review synthesis.

Each question runs its own bounded loop: generate a retrieval query, pull
passages from the store, draft an answer, and let the evaluator judge it.
An unsatisfactory verdict triggers a web search whose output replaces the
draft wholesale before the next evaluation round. Web search therefore never
happens before the first retrieval, and rounds always equal one plus the
number of searches performed.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .agent_runtime import (
    AgentConfig,
    run_agent,
    request_text,
    request_verdict,
)
from .core_model import DesignObjectives, LiteratureReview, Verdict
from .errors import NoQuestionsError
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
from .prompt_engine import (
    ActionOutcome,
    AncillaryText,
    TemplateSet,
    assemble,
    render_template,
    select_template,
)
from .rag_store import (
    ScoredChunk,
    VectorStore,
    format_hits,
    insufficient_information,
)
from .toolbox import (
    SearchProvider,
    SearchResult,
    ToolRegistry,
    format_search_results,
    make_thought_tool,
    search_web,
    thought_signature,
)
from .util import write_json, write_text

log = logging.getLogger(__name__)

PIPELINE_NAME = "knowledge"
DEFAULT_EVAL_CAP = 5
DEFAULT_RETRIEVAL_K = 5

_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class ResearchQuestion:
    """One question to answer before design work, tied to its origin."""

    text: str
    origin_kind: str = "goal"
    origin_index: int = 0

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("question text must be nonempty")
        if self.origin_kind not in ("goal", "requirement"):
            raise ValueError(f"unknown origin kind {self.origin_kind!r}")


@dataclass(frozen=True)
class AnswerDraft:
    """The answer a question ended up with, plus its audit trail."""

    question: ResearchQuestion
    answer: str
    evidence: tuple[object, ...]
    rounds: int
    satisfied: bool

    def evidence_dicts(self) -> list[dict]:
        out: list[dict] = []
        for item in self.evidence:
            if isinstance(item, ScoredChunk):
                out.append(
                    {
                        "kind": "chunk",
                        "doc_id": item.chunk.doc_id,
                        "chunk_index": item.chunk.chunk_index,
                        "score": round(item.score, 6),
                    }
                )
            elif isinstance(item, SearchResult):
                out.append(
                    {"kind": "web", "title": item.title, "locator": item.locator}
                )
        return out

    def to_dict(self) -> dict:
        return {
            "question": self.question.text,
            "origin": f"{self.question.origin_kind}:{self.question.origin_index}",
            "answer": self.answer,
            "evidence": self.evidence_dicts(),
            "rounds": self.rounds,
            "satisfied": self.satisfied,
        }


@dataclass(frozen=True)
class KnowledgeRunResult:
    review: LiteratureReview
    drafts: tuple[AnswerDraft, ...]
    questions: tuple[ResearchQuestion, ...]
    question_traces: tuple[ExecutionResult, ...]


def _normalize(text: str) -> str:
    return _WS_RE.sub(" ", text.strip().casefold())


def _objectives_context(objectives: DesignObjectives) -> str:
    lines = [f"Project: {objectives.project_name}", "Goals:"]
    lines.extend(f"- {goal}" for goal in objectives.goals)
    lines.append("Requirements:")
    lines.extend(f"- {req}" for req in objectives.requirements)
    return "\n".join(lines)


class KnowledgePipeline:
    """Owns the question loop and the per-question evaluation graph."""

    def __init__(
        self,
        factory: GatewayFactory,
        templates: TemplateSet,
        store: VectorStore,
        search_provider: SearchProvider,
        eval_cap: int = DEFAULT_EVAL_CAP,
        retrieval_k: int = DEFAULT_RETRIEVAL_K,
        search_max_results: int = 5,
        thought_cap: int = 3,
        step_cap: int = 12,
    ) -> None:
        self.factory = factory
        self.templates = templates
        self.store = store
        self.search_provider = search_provider
        self.eval_cap = eval_cap
        self.retrieval_k = retrieval_k
        self.search_max_results = search_max_results
        self.thought_cap = thought_cap
        self.step_cap = step_cap

    # -- question generation -------------------------------------------------

    def generate_questions(
        self, objectives: DesignObjectives
    ) -> list[ResearchQuestion]:
        """One agent run per goal; duplicates collapse to first occurrence."""
        template = select_template(self.templates, "question_gen")
        context = _objectives_context(objectives)
        questions: list[ResearchQuestion] = []
        seen: set[str] = set()
        for index, goal in enumerate(objectives.goals):
            session = self.factory.session(PIPELINE_NAME, "question_gen")
            try:
                result = run_agent(
                    AgentConfig(
                        role_tag="question_gen",
                        response_schema="QuestionListResponse",
                        thought_cap=self.thought_cap,
                        step_cap=self.step_cap,
                    ),
                    task_input=goal,
                    tools=_empty_registry(),
                    session=session,
                    template=template,
                    bindings={"context": context},
                )
            finally:
                session.close()
            for text in result.response.payload.get("questions", []):
                if not text.strip():
                    continue
                key = _normalize(text)
                if key in seen:
                    continue
                seen.add(key)
                questions.append(
                    ResearchQuestion(
                        text=text.strip(), origin_kind="goal", origin_index=index
                    )
                )
        if not questions:
            raise NoQuestionsError("question generation produced no questions")
        return questions

    # -- per-question evaluation loop ----------------------------------------

    def build_answer_graph(
        self, question: ResearchQuestion, context: str
    ) -> DecisionGraph:
        question_template = select_template(self.templates, "question_gen")
        generation_template = select_template(self.templates, "generation")
        evaluation_template = select_template(self.templates, "evaluation")

        def node_query_gen(state: PipelineState) -> None:
            rendered = render_template(
                question_template,
                {
                    "task": f"Formulate one retrieval query for: {question.text}",
                    "context": context,
                },
            )
            prompt = assemble(
                rendered,
                ancillary=AncillaryText(
                    body=(
                        "Reply with the TextResponse tool carrying exactly one "
                        "retrieval query."
                    ),
                    origin="query_request",
                ),
            ).text
            session = self.factory.session(PIPELINE_NAME, "query_gen")
            try:
                query = request_text(session, prompt, model_role="generator")
            finally:
                session.close()
            state["query"] = query.strip() or question.text

        def node_retrieve(state: PipelineState) -> None:
            hits = self.store.query(state["query"], k=self.retrieval_k)
            output = format_hits(hits)
            if insufficient_information(hits, self.retrieval_k):
                output += (
                    "\nNOTE: the knowledge base may be insufficient for this "
                    "query."
                )
            outcomes: list[ActionOutcome] = state["outcomes"]
            outcomes.append(
                ActionOutcome(
                    step_index=len(outcomes),
                    tool_name="retrieve_knowledge",
                    arguments={"query": state["query"]},
                    output=output,
                )
            )
            state["evidence"].extend(hits)

        def node_generate(state: PipelineState) -> None:
            rendered = render_template(generation_template, {"task": question.text})
            prompt = assemble(rendered, state["outcomes"]).text
            session = self.factory.session(PIPELINE_NAME, "generate")
            try:
                state["draft"] = request_text(session, prompt, model_role="generator")
            finally:
                session.close()

        def node_evaluate(state: PipelineState) -> None:
            rendered = render_template(
                evaluation_template,
                {"task": question.text, "draft": state["draft"]},
            )
            prompt = assemble(rendered, state["outcomes"]).text
            session = self.factory.session(PIPELINE_NAME, "evaluate")
            try:
                state["verdict"] = request_verdict(session, prompt)
            finally:
                session.close()
            state["rounds"] = state.get("rounds", 0) + 1

        def node_check(state: PipelineState) -> str:
            verdict: Verdict = state["verdict"]
            if verdict.satisfactory:
                return "satisfied"
            if state["rounds"] >= self.eval_cap:
                return "cap"
            return "search"

        def node_web_search(state: PipelineState) -> None:
            verdict: Verdict = state["verdict"]
            rendered = render_template(
                evaluation_template,
                {"task": question.text, "draft": state["draft"]},
            )
            prompt = assemble(
                rendered,
                state["outcomes"],
                AncillaryText(
                    body=(
                        "The draft was judged unsatisfactory: "
                        f"{verdict.feedback or 'no feedback given'}. Reply with "
                        "the TextResponse tool carrying one concise web search "
                        "query that would close the gap."
                    ),
                    origin="search_query_request",
                ),
            ).text
            session = self.factory.session(PIPELINE_NAME, "search_query")
            try:
                search_query = request_text(session, prompt, model_role="evaluator")
            finally:
                session.close()
            search_query = search_query.strip() or question.text
            results = search_web(
                self.search_provider, search_query, self.search_max_results
            )
            output = format_search_results(results, search_query)
            outcomes: list[ActionOutcome] = state["outcomes"]
            outcomes.append(
                ActionOutcome(
                    step_index=len(outcomes),
                    tool_name="search_web",
                    arguments={"query": search_query},
                    output=output,
                )
            )
            state["evidence"].extend(results)
            state["searches"] = state.get("searches", 0) + 1
            state["draft"] = output

        def node_accept(state: PipelineState) -> None:
            state["satisfied"] = True

        def node_give_up(state: PipelineState) -> None:
            state["satisfied"] = False

        nodes = (
            NodeDef("query_gen", "agent", node_query_gen),
            NodeDef("retrieve", "function", node_retrieve),
            NodeDef("generate", "agent", node_generate),
            NodeDef("evaluate", "agent", node_evaluate),
            NodeDef("check", "decision", node_check),
            NodeDef("web_search", "function", node_web_search),
            NodeDef("accept", "terminal", node_accept),
            NodeDef("give_up", "terminal", node_give_up),
        )
        edges = (
            EdgeDef("query_gen", "ok", "retrieve"),
            EdgeDef("retrieve", "ok", "generate"),
            EdgeDef("generate", "ok", "evaluate"),
            EdgeDef("evaluate", "ok", "check"),
            EdgeDef("check", "satisfied", "accept"),
            EdgeDef("check", "search", "web_search"),
            EdgeDef("check", "cap", "give_up"),
            EdgeDef("web_search", "ok", "evaluate"),
        )
        return DecisionGraph(
            name=f"answer:{question.origin_kind}:{question.origin_index}",
            nodes=nodes,
            edges=edges,
            start="query_gen",
        )

    def answer_with_evaluation(
        self, question: ResearchQuestion, context: str = ""
    ) -> tuple[AnswerDraft, ExecutionResult]:
        graph = self.build_answer_graph(question, context)
        state = PipelineState(
            data={
                "question": question.text,
                "outcomes": [],
                "evidence": [],
                "draft": "",
                "rounds": 0,
                "searches": 0,
            }
        )
        result = execute(
            graph,
            state,
            node_caps={
                "evaluate": self.eval_cap,
                "check": self.eval_cap,
                "web_search": self.eval_cap,
            },
            clock=self.factory.clock,
        )
        draft = AnswerDraft(
            question=question,
            answer=str(result.state.get("draft", "")),
            evidence=tuple(result.state.get("evidence", [])),
            rounds=int(result.state.get("rounds", 0)),
            satisfied=bool(result.state.get("satisfied", False)),
        )
        return draft, result

    # -- review synthesis ----------------------------------------------------

    def synthesize_review(
        self, drafts: Sequence[AnswerDraft], objectives: DesignObjectives
    ) -> LiteratureReview:
        if not drafts:
            raise NoQuestionsError("cannot synthesize a review from zero drafts")
        template = select_template(self.templates, "review")
        rendered_drafts = []
        for i, draft in enumerate(drafts):
            caveat = (
                ""
                if draft.satisfied
                else f"\n(unverified after {draft.rounds} evaluation rounds)"
            )
            rendered_drafts.append(
                f"### Q{i + 1}: {draft.question.text}\n{draft.answer}{caveat}"
            )
        session = self.factory.session(PIPELINE_NAME, "review")
        try:
            result = run_agent(
                AgentConfig(
                    role_tag="review",
                    response_schema="TextResponse",
                    thought_cap=self.thought_cap,
                    step_cap=self.step_cap,
                ),
                task_input=_objectives_context(objectives),
                tools=_empty_registry(),
                session=session,
                template=template,
                bindings={"drafts": "\n\n".join(rendered_drafts)},
            )
        finally:
            session.close()
        body = str(result.response.payload["text"])

        sources: list[tuple[str, str]] = []
        seen: set[str] = set()
        for draft in drafts:
            for item in draft.evidence:
                if isinstance(item, ScoredChunk):
                    title, locator = item.chunk.doc_id, item.chunk.doc_id
                elif isinstance(item, SearchResult):
                    title, locator = item.title, item.locator
                else:
                    continue
                if locator in seen:
                    continue
                seen.add(locator)
                sources.append((title, locator))
        return LiteratureReview(body=body, sources=tuple(sources))

    # -- full pipeline --------------------------------------------------------

    def run(
        self,
        objectives: DesignObjectives,
        knowledge_dir: Path,
        traces_dir: Path | None = None,
    ) -> KnowledgeRunResult:
        context = _objectives_context(objectives)
        drafts: list[AnswerDraft] = []
        traces: list[ExecutionResult] = []
        questions: list[ResearchQuestion] = []
        review_holder: dict[str, LiteratureReview] = {}

        def node_questions(state: PipelineState) -> None:
            questions.extend(self.generate_questions(objectives))

        def node_answer_all(state: PipelineState) -> None:
            for question in questions:
                draft, trace = self.answer_with_evaluation(question, context)
                drafts.append(draft)
                traces.append(trace)

        def node_synthesize(state: PipelineState) -> None:
            review_holder["review"] = self.synthesize_review(drafts, objectives)

        graph = DecisionGraph(
            name="knowledge",
            nodes=(
                NodeDef("generate_questions", "agent", node_questions),
                NodeDef("answer_all", "function", node_answer_all),
                NodeDef("synthesize", "agent", node_synthesize),
                NodeDef("done", "terminal", None),
            ),
            edges=(
                EdgeDef("generate_questions", "ok", "answer_all"),
                EdgeDef("answer_all", "ok", "synthesize"),
                EdgeDef("synthesize", "ok", "done"),
            ),
            start="generate_questions",
        )
        top = execute(graph, clock=self.factory.clock)
        review = review_holder["review"]

        write_text(
            knowledge_dir / "literature_review.md",
            render_review_markdown(review, drafts),
        )
        write_json(
            knowledge_dir / "drafts.json", [draft.to_dict() for draft in drafts]
        )
        if traces_dir is not None:
            export_trace(top.trace, traces_dir / "knowledge_trace.json")
            for i, trace in enumerate(traces):
                export_trace(trace.trace, traces_dir / f"question_{i}_trace.json")
        return KnowledgeRunResult(
            review=review,
            drafts=tuple(drafts),
            questions=tuple(questions),
            question_traces=tuple(traces),
        )


def render_review_markdown(
    review: LiteratureReview, drafts: Sequence[AnswerDraft]
) -> str:
    parts = [review.body.rstrip("\n")]
    unverified = [draft for draft in drafts if not draft.satisfied]
    if unverified:
        parts.append("\n\n## Unverified Questions\n")
        parts.append(
            "\n".join(
                f"- {draft.question.text} (after {draft.rounds} rounds)"
                for draft in unverified
            )
        )
    if review.sources:
        parts.append("\n\n## Sources\n")
        parts.append(
            "\n".join(f"- {title} ({locator})" for title, locator in review.sources)
        )
    return "".join(parts) + "\n"


def _empty_registry() -> ToolRegistry:
    registry = ToolRegistry()
    registry.register(thought_signature(), make_thought_tool())
    return registry
