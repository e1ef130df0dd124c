"""Command-line surface: workspace setup, pipelines, trials, checking, replay.

Exit codes: 0 success, 1 quality failure (pipeline or checks), 2 usage or
configuration error, 3 replay mismatch.
"""

from __future__ import annotations

import logging
import os
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Iterator

import click

from .config import (
    DEFAULT_TEMPLATES,
    Workspace,
    WorkspaceConfig,
    default_config,
    load_config,
    load_objectives,
    search_api_key,
)
from .design_checks import (
    CheckConfig,
    CheckSubject,
    render_report_table,
    report as run_checks,
)
from .design_pipeline import DesignPipeline
from .errors import (
    ConfigError,
    ReplayMismatchError,
    SynthForgeError,
    TemplateError,
    WorkspaceLockedError,
)
from .knowledge_pipeline import KnowledgePipeline
from .llm_gateway import GatewayFactory, HttpBackend, ScriptedBackend
from .prompt_engine import TemplateSet
from .rag_store import (
    COLLECTIONS,
    LocalHashEmbedder,
    VectorStore,
    format_hits,
    insufficient_information,
)
from .reporting import (
    TrialResult,
    render_report_figure,
    render_trials_figure,
    select_best,
    write_report_csv,
    write_trials_csv,
)
from .toolbox import (
    CodeInterpreter,
    FixtureSearchProvider,
    HttpSearchProvider,
    SearchProvider,
    ToolRegistry,
    make_python_tool,
    make_retrieve_tool,
    make_search_tool,
    make_thought_tool,
    python_signature,
    retrieve_signature,
    search_signature,
    thought_signature,
)
from .util import Clock, DeterministicClock, sha256_hex, write_json, write_text

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_QUALITY = 1
EXIT_USAGE = 2
EXIT_REPLAY = 3

REPLAY_SHADOW_DIR = ".replay"

SAMPLE_OBJECTIVES = """\
project_name: sample_project
goals:
  - Describe what the finished hardware should accomplish.
requirements:
  - List the measurable constraints the design must meet.
"""

SAMPLE_CONFIG = """\
# Workspace configuration. Unknown keys are rejected.
backend: http
models:
  endpoint: https://api.openai.com
  generator:
    model_id: gpt-4o
    temperature: 0.2
    max_output_tokens: 4096
  evaluator:
    model_id: gpt-4o-mini
    temperature: 0.0
    max_output_tokens: 2048
trials: 5
optimization_requested: false
tools:
  search:
    provider: fixture
caps:
  thought_cap: 3
  step_cap: 12
  eval_cap: 5
  design_eval_cap: 3
  final_eval_cap: 3
  max_calls: 500
rag:
  chunk_size: 1000
  overlap: 200
  retrieval_k: 5
  dimension: 256
  threshold: 0.25
"""


# -- shared plumbing -----------------------------------------------------------


def _finish(body: Callable[[], int]) -> None:
    """Run a command body and translate failures into exit codes."""
    try:
        code = body()
    except ReplayMismatchError as exc:
        click.echo(
            f"replay mismatch at sequence {exc.sequence_no} ({exc.path})", err=True
        )
        if exc.diff:
            click.echo(exc.diff, err=True)
        code = EXIT_REPLAY
    except (ConfigError, TemplateError, WorkspaceLockedError) as exc:
        click.echo(f"error: {exc}", err=True)
        code = EXIT_USAGE
    except SynthForgeError as exc:
        click.echo(f"error: {exc}", err=True)
        code = EXIT_QUALITY
    sys.exit(code)


@contextmanager
def workspace_lock(ws: Workspace) -> Iterator[None]:
    """One command per workspace: an O_EXCL lock file held for the duration."""
    ws.root.mkdir(parents=True, exist_ok=True)
    try:
        fd = os.open(ws.lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise WorkspaceLockedError(
            f"workspace busy: lock file {ws.lock_path} exists "
            "(remove it if no other command is running)"
        ) from None
    try:
        os.write(fd, f"{os.getpid()}\n".encode("ascii"))
        os.close(fd)
        yield
    finally:
        ws.lock_path.unlink(missing_ok=True)


def _load_ws_config(ws: Workspace, config_path: Path | None) -> WorkspaceConfig:
    if config_path is not None:
        return load_config(config_path)
    if ws.config_path.is_file():
        return load_config(ws.config_path)
    return default_config()


def _load_templates(ws: Workspace, cfg: WorkspaceConfig) -> TemplateSet:
    return TemplateSet.load_dir(cfg.resolve_templates_dir(ws))


def build_store(ws: Workspace, cfg: WorkspaceConfig, rebuild: bool) -> VectorStore:
    """Index knowledge sources; subdirectories named after a collection map to
    it, everything else lands in the project collection."""
    if not rebuild and (ws.index_dir / "meta.json").is_file():
        return VectorStore.load(
            ws.index_dir, LocalHashEmbedder(cfg.rag.dimension)
        )
    store = VectorStore(
        LocalHashEmbedder(cfg.rag.dimension),
        chunk_size=cfg.rag.chunk_size,
        overlap=cfg.rag.overlap,
    )
    groups: dict[str, list[tuple[str, str]]] = {name: [] for name in COLLECTIONS}
    if ws.sources_dir.is_dir():
        for path in sorted(ws.sources_dir.rglob("*")):
            if not path.is_file():
                continue
            rel = path.relative_to(ws.sources_dir)
            collection = (
                rel.parts[0]
                if len(rel.parts) > 1 and rel.parts[0] in COLLECTIONS
                else "project"
            )
            try:
                text = path.read_text("utf-8")
            except UnicodeDecodeError:
                log.warning("skipping non-text source %s", rel)
                continue
            groups[collection].append((rel.as_posix(), text))
    for collection in COLLECTIONS:
        if groups[collection]:
            store.ingest(collection, groups[collection])
    store.save(ws.index_dir)
    return store


def build_search_provider(ws: Workspace, cfg: WorkspaceConfig) -> SearchProvider:
    settings = cfg.tools.search
    if settings.provider == "fixture":
        if settings.fixtures_path:
            path = ws.root / settings.fixtures_path
            if not path.is_file():
                raise ConfigError(f"search fixtures file not found: {path}")
            return FixtureSearchProvider.from_file(path)
        return FixtureSearchProvider({})
    if settings.provider == "http":
        if not settings.endpoint:
            raise ConfigError("tools.search.endpoint required for the http provider")
        return HttpSearchProvider(settings.endpoint, api_key=search_api_key(settings))
    raise ConfigError(f"unknown search provider {settings.provider!r}")


def build_factory(
    ws: Workspace,
    cfg: WorkspaceConfig,
    record: bool,
    replay_root: Path | None,
) -> GatewayFactory:
    if replay_root is not None:
        return GatewayFactory(
            replay_root=replay_root,
            clock=DeterministicClock(),
            max_calls=cfg.caps.max_calls,
        )
    if cfg.backend == "scripted":
        script = ws.root / cfg.script_path
        if not script.is_file():
            raise ConfigError(f"script file not found: {script}")
        return GatewayFactory(
            backend=ScriptedBackend.from_file(script),
            transcripts_root=ws.transcripts_dir,
            record=True,
            clock=DeterministicClock(),
            max_calls=cfg.caps.max_calls,
        )
    backend = HttpBackend(cfg.endpoint, cfg.roster)
    return GatewayFactory(
        backend=backend,
        transcripts_root=ws.transcripts_dir,
        record=record,
        clock=Clock(),
        max_calls=cfg.caps.max_calls,
    )


def build_tools(
    ws: Workspace,
    cfg: WorkspaceConfig,
    store: VectorStore,
    provider: SearchProvider,
) -> ToolRegistry:
    registry = ToolRegistry()
    registry.register(thought_signature(), make_thought_tool())
    registry.register(
        search_signature(), make_search_tool(provider, cfg.tools.search.max_results)
    )
    interpreter = (
        CodeInterpreter(cfg.tools.interpreter) if cfg.tools.interpreter else None
    )
    registry.register(
        python_signature(),
        make_python_tool(interpreter, timeout_s=cfg.tools.exec_timeout_s),
    )

    def lookup(query: str) -> str:
        hits = store.query(query, k=cfg.rag.retrieval_k)
        text = format_hits(hits)
        if insufficient_information(hits, cfg.rag.retrieval_k, cfg.rag.threshold):
            text += "\nNOTE: the knowledge base may be insufficient for this query."
        return text

    registry.register(retrieve_signature(), make_retrieve_tool(lookup))
    return registry


def _check_config(cfg: WorkspaceConfig) -> CheckConfig:
    return CheckConfig(
        optimization_requested=cfg.optimization_requested,
        syntax_hook=cfg.syntax_hook(),
        synth_hook=cfg.synth_hook(),
    )


def _reset_transcripts(ws: Workspace, pipelines: tuple[str, ...]) -> None:
    """Scripted runs re-record from scratch so repeat runs stay identical."""
    for name in pipelines:
        target = ws.transcripts_dir / name
        if target.is_dir():
            shutil.rmtree(target)


# -- pipeline drivers ----------------------------------------------------------


def _gather(ws: Workspace, cfg: WorkspaceConfig, factory: GatewayFactory) -> int:
    objectives = load_objectives(ws.objectives_path)
    templates = _load_templates(ws, cfg)
    store = build_store(ws, cfg, rebuild=True)
    provider = build_search_provider(ws, cfg)
    pipeline = KnowledgePipeline(
        factory,
        templates,
        store,
        provider,
        eval_cap=cfg.caps.eval_cap,
        retrieval_k=cfg.rag.retrieval_k,
        search_max_results=cfg.tools.search.max_results,
        thought_cap=cfg.caps.thought_cap,
        step_cap=cfg.caps.step_cap,
    )
    result = pipeline.run(objectives, ws.knowledge_dir, traces_dir=ws.knowledge_dir)
    unresolved = sum(1 for draft in result.drafts if not draft.satisfied)
    click.echo(
        f"literature review written to {ws.review_path} "
        f"({len(result.drafts)} questions, {unresolved} unverified)"
    )
    return EXIT_OK


def _design(
    ws: Workspace,
    cfg: WorkspaceConfig,
    factory: GatewayFactory,
    trials: int,
    no_review: bool,
    parallel: bool,
) -> int:
    objectives = load_objectives(ws.objectives_path)
    if not no_review and not ws.review_path.is_file():
        raise ConfigError(
            f"no literature review at {ws.review_path}; "
            "run gather first or pass --no-review"
        )
    review_text = (
        ws.review_path.read_text("utf-8")
        if not no_review and ws.review_path.is_file()
        else "No literature review is available; rely on the objectives."
    )
    templates = _load_templates(ws, cfg)
    store = build_store(ws, cfg, rebuild=False)
    provider = build_search_provider(ws, cfg)
    tools = build_tools(ws, cfg, store, provider)
    check_config = _check_config(cfg)
    pipeline = DesignPipeline(
        factory,
        templates,
        tools,
        design_eval_cap=cfg.caps.design_eval_cap,
        final_eval_cap=cfg.caps.final_eval_cap,
        check_config=check_config,
        module_step_cap=cfg.caps.step_cap,
        thought_cap=cfg.caps.thought_cap,
    )

    if parallel and factory.deterministic:
        raise ConfigError("--parallel needs a live backend; scripted runs are ordered")

    results: dict[int, TrialResult] = {}
    failures: dict[int, str] = {}

    def run_trial(index: int) -> None:
        trial_dir = ws.trials_dir / str(index)
        if trial_dir.exists():
            shutil.rmtree(trial_dir)
        try:
            outcome = pipeline.run(
                objectives, review_text, trial_dir, traces_dir=trial_dir
            )
            trial_report = run_checks(CheckSubject.from_dir(trial_dir), check_config)
            write_json(trial_dir / "report.json", trial_report.to_dict())
            results[index] = TrialResult(
                index=index, manifest=outcome.manifest, report=trial_report
            )
        except ReplayMismatchError:
            raise
        except SynthForgeError as exc:
            failures[index] = f"{type(exc).__name__}: {exc}"

    if parallel:
        with ThreadPoolExecutor(max_workers=min(4, trials)) as pool:
            for future in [pool.submit(run_trial, i) for i in range(trials)]:
                future.result()
    else:
        for index in range(trials):
            run_trial(index)

    for index in range(trials):
        if index in results:
            trial = results[index]
            click.echo(
                f"trial {index}: score {trial.score}/5, "
                f"{trial.total_findings} findings"
            )
        else:
            click.echo(f"trial {index}: failed ({failures[index]})", err=True)

    if not results:
        click.echo("all trials failed", err=True)
        return EXIT_QUALITY

    ranked = [results[index] for index in sorted(results)]
    best = select_best(ranked)
    best_src = ws.trials_dir / str(best.index)
    if ws.best_dir.exists():
        shutil.rmtree(ws.best_dir)
    shutil.copytree(best_src, ws.best_dir)

    design_dir = ws.design_dir
    write_json(design_dir / "manifest.json", dict(best.manifest))
    write_json(design_dir / "report.json", best.report.to_dict())
    graph_path = best_src / "system_design.json"
    if graph_path.is_file():
        write_text(
            design_dir / "system_design.json", graph_path.read_text("utf-8")
        )
    write_report_csv(best.report, design_dir / "report.csv")
    render_report_figure(best.report, design_dir / "report.png")
    write_trials_csv(ranked, best.index, design_dir / "trials.csv")
    render_trials_figure(ranked, best.index, design_dir / "trials_scores.png")

    click.echo(render_report_table(best.report))
    click.echo(
        f"selected trial {best.index} (score {best.score}/5); "
        f"copied to {ws.best_dir}"
    )
    return EXIT_OK


# -- commands -------------------------------------------------------------------


@click.group()
@click.option("--verbose", is_flag=True, help="Log pipeline internals to stderr.")
def main(verbose: bool) -> None:
    """Multi-agent generator for modular HLS C++ projects."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command("init")
@click.argument("workspace", type=click.Path(path_type=Path))
def init_command(workspace: Path) -> None:
    """Scaffold a workspace with config, templates, and a sample objectives file."""

    def body() -> int:
        ws = Workspace(workspace)
        ws.scaffold()
        if not ws.objectives_path.exists():
            write_text(ws.objectives_path, SAMPLE_OBJECTIVES)
        if not ws.config_path.exists():
            write_text(ws.config_path, SAMPLE_CONFIG)
        if not any(ws.templates_dir.iterdir()):
            for source in sorted(DEFAULT_TEMPLATES.iterdir()):
                if source.is_file():
                    shutil.copy(source, ws.templates_dir / source.name)
        click.echo(f"workspace ready at {ws.root}")
        return EXIT_OK

    _finish(body)


@main.command("gather")
@click.argument("workspace", type=click.Path(path_type=Path))
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
@click.option("--record", is_flag=True, help="Record transcripts on live backends.")
@click.option(
    "--replay",
    "replay_path",
    type=click.Path(path_type=Path),
    default=None,
    help="Serve completions from recorded transcripts instead of a backend.",
)
def gather_command(
    workspace: Path, config_path: Path | None, record: bool, replay_path: Path | None
) -> None:
    """Run the knowledge pipeline and write the literature review."""

    def body() -> int:
        ws = Workspace(workspace)
        cfg = _load_ws_config(ws, config_path)
        with workspace_lock(ws):
            factory = build_factory(ws, cfg, record, replay_path)
            if replay_path is None and factory.deterministic:
                _reset_transcripts(ws, ("knowledge",))
            return _gather(ws, cfg, factory)

    _finish(body)


@main.command("design")
@click.argument("workspace", type=click.Path(path_type=Path))
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
@click.option("--trials", type=int, default=None, help="Design attempts to score.")
@click.option("--record", is_flag=True, help="Record transcripts on live backends.")
@click.option(
    "--replay",
    "replay_path",
    type=click.Path(path_type=Path),
    default=None,
    help="Serve completions from recorded transcripts instead of a backend.",
)
@click.option("--no-review", is_flag=True, help="Proceed without a literature review.")
@click.option("--parallel", is_flag=True, help="Run trials concurrently (live only).")
def design_command(
    workspace: Path,
    config_path: Path | None,
    trials: int | None,
    record: bool,
    replay_path: Path | None,
    no_review: bool,
    parallel: bool,
) -> None:
    """Run design trials, score each, and keep the best one."""

    def body() -> int:
        ws = Workspace(workspace)
        cfg = _load_ws_config(ws, config_path)
        count = trials if trials is not None else cfg.trials
        if count < 1:
            raise ConfigError("--trials must be >= 1")
        with workspace_lock(ws):
            factory = build_factory(ws, cfg, record, replay_path)
            if replay_path is None and factory.deterministic:
                _reset_transcripts(ws, ("design",))
            return _design(ws, cfg, factory, count, no_review, parallel)

    _finish(body)


@main.command("run")
@click.argument("workspace", type=click.Path(path_type=Path))
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
@click.option("--trials", type=int, default=None, help="Design attempts to score.")
@click.option("--record", is_flag=True, help="Record transcripts on live backends.")
@click.option(
    "--replay",
    "replay_path",
    type=click.Path(path_type=Path),
    default=None,
    help="Serve completions from recorded transcripts instead of a backend.",
)
@click.option("--no-review", is_flag=True, help="Skip straight to design.")
@click.option("--parallel", is_flag=True, help="Run trials concurrently (live only).")
def run_command(
    workspace: Path,
    config_path: Path | None,
    trials: int | None,
    record: bool,
    replay_path: Path | None,
    no_review: bool,
    parallel: bool,
) -> None:
    """Gather knowledge, then design: the full flow from one command."""

    def body() -> int:
        ws = Workspace(workspace)
        cfg = _load_ws_config(ws, config_path)
        count = trials if trials is not None else cfg.trials
        if count < 1:
            raise ConfigError("--trials must be >= 1")
        with workspace_lock(ws):
            factory = build_factory(ws, cfg, record, replay_path)
            if replay_path is None and factory.deterministic:
                _reset_transcripts(ws, ("knowledge", "design"))
            if not no_review:
                code = _gather(ws, cfg, factory)
                if code != EXIT_OK:
                    return code
            return _design(ws, cfg, factory, count, no_review, parallel)

    _finish(body)


@main.command("check")
@click.argument("design_dir", type=click.Path(path_type=Path))
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
def check_command(design_dir: Path, config_path: Path | None) -> None:
    """Run the quality checks on an emitted design directory."""

    def body() -> int:
        if not design_dir.is_dir():
            raise ConfigError(f"design directory not found: {design_dir}")
        cfg = load_config(config_path) if config_path else default_config()
        check_config = _check_config(cfg)
        subject = CheckSubject.from_dir(design_dir)
        check_report = run_checks(subject, check_config)
        write_json(design_dir / "report.json", check_report.to_dict())
        write_report_csv(check_report, design_dir / "report.csv")
        render_report_figure(check_report, design_dir / "report.png")
        click.echo(render_report_table(check_report))
        failed = check_report.failed_automated()
        if failed:
            click.echo(f"failed metrics: {', '.join(failed)}", err=True)
            return EXIT_QUALITY
        return EXIT_OK

    _finish(body)


# -- replay ---------------------------------------------------------------------

_REPLAY_INPUTS = ("objectives.yaml", "config.yaml")
_DIFF_SUFFIXES = {".md", ".json", ".jsonl", ".cpp", ".h", ".csv", ".yaml", ".txt"}


def _is_diff_target(rel: Path) -> bool:
    if rel.suffix not in _DIFF_SUFFIXES:
        return False
    return not rel.name.endswith("_trace.json")


def _copy_inputs(ws: Workspace, cfg: WorkspaceConfig, shadow_root: Path) -> None:
    for name in _REPLAY_INPUTS:
        source = ws.root / name
        if source.is_file():
            shutil.copy(source, shadow_root / name)
    if ws.templates_dir.is_dir():
        shutil.copytree(
            ws.templates_dir, shadow_root / "templates", dirs_exist_ok=True
        )
    if ws.sources_dir.is_dir():
        shutil.copytree(
            ws.sources_dir,
            shadow_root / "knowledge" / "sources",
            dirs_exist_ok=True,
        )
    fixtures = cfg.tools.search.fixtures_path
    if fixtures:
        source = ws.root / fixtures
        if source.is_file():
            target = shadow_root / fixtures
            target.parent.mkdir(parents=True, exist_ok=True)
            shutil.copy(source, target)


def _collect_outputs(root: Path) -> dict[str, str]:
    """Relative path -> content hash for every replay-comparable artifact."""
    digests: dict[str, str] = {}
    for base in ("knowledge", "design"):
        directory = root / base
        if not directory.is_dir():
            continue
        for path in sorted(directory.rglob("*")):
            if not path.is_file():
                continue
            rel = path.relative_to(root)
            if rel.parts[:2] == ("knowledge", "sources"):
                continue
            if rel.parts[:2] == ("knowledge", "index"):
                continue
            if _is_diff_target(rel):
                digests[rel.as_posix()] = sha256_hex(path.read_text("utf-8"))
    return digests


@main.command("replay")
@click.argument("workspace", type=click.Path(path_type=Path))
@click.argument(
    "transcript_dir", type=click.Path(path_type=Path), required=False, default=None
)
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
def replay_command(
    workspace: Path, transcript_dir: Path | None, config_path: Path | None
) -> None:
    """Re-run both pipelines from recorded transcripts and diff the artifacts.

    The rerun happens in a shadow directory inside the workspace, so the
    original outputs are left untouched and compared afterwards.
    """

    def body() -> int:
        ws = Workspace(workspace)
        cfg = _load_ws_config(ws, config_path)
        transcripts = transcript_dir if transcript_dir else ws.transcripts_dir
        if not transcripts.is_dir():
            raise ConfigError(f"transcript directory not found: {transcripts}")

        shadow_root = ws.root / REPLAY_SHADOW_DIR
        with workspace_lock(ws):
            if shadow_root.exists():
                shutil.rmtree(shadow_root)
            shadow_root.mkdir(parents=True)
            try:
                shadow = Workspace(shadow_root)
                shadow.scaffold()
                _copy_inputs(ws, cfg, shadow_root)
                factory = build_factory(
                    shadow, cfg, record=False, replay_root=transcripts
                )
                code = _gather(shadow, cfg, factory)
                if code == EXIT_OK:
                    code = _design(
                        shadow,
                        cfg,
                        factory,
                        cfg.trials,
                        no_review=False,
                        parallel=False,
                    )
                if code != EXIT_OK:
                    return code

                produced = _collect_outputs(shadow_root)
                original = _collect_outputs(ws.root)
                problems = []
                for rel, digest in sorted(produced.items()):
                    if rel not in original:
                        problems.append(f"missing from workspace: {rel}")
                    elif original[rel] != digest:
                        problems.append(f"differs: {rel}")
                if problems:
                    for problem in problems:
                        click.echo(problem, err=True)
                    click.echo(
                        f"replay produced {len(problems)} differing files", err=True
                    )
                    return EXIT_QUALITY
                click.echo(f"replay matched {len(produced)} files")
                return EXIT_OK
            finally:
                if shadow_root.exists():
                    shutil.rmtree(shadow_root)

    _finish(body)


if __name__ == "__main__":
    main()
