"""Exception taxonomy shared across the package."""

from __future__ import annotations


class SynthForgeError(Exception):
    """Base class for all package errors."""


class ConfigError(SynthForgeError):
    """Workspace configuration is missing, unparseable, or has unknown keys."""


class TemplateError(SynthForgeError):
    """Prompt template problems: unknown role, duplicate role, missing binding."""


class PromptTooLongError(SynthForgeError):
    """Assembled prompt exceeded the configured character guard."""


class GatewayError(SynthForgeError):
    """Base for completion-backend failures."""


class TransportError(GatewayError):
    """Network-level failure talking to a live backend (retryable)."""


class MalformedResponseError(GatewayError):
    """Backend returned a payload that does not decode to a completion."""


class BudgetExceededError(GatewayError):
    """The completion call-count cap for this run was exhausted."""


class ScriptExhaustedError(GatewayError):
    """A scripted or replayed backend received more calls than it has entries."""


class TranscriptClosedError(GatewayError):
    """Attempted to record to a transcript sink after it was closed."""


class ReplayMismatchError(GatewayError):
    """A replayed request differs from the recorded one."""

    def __init__(self, sequence_no: int, diff: str, path: str = "") -> None:
        self.sequence_no = sequence_no
        self.diff = diff
        self.path = path
        where = f" in {path}" if path else ""
        super().__init__(
            f"replay mismatch at sequence_no {sequence_no}{where}:\n{diff}"
        )


class AgentError(SynthForgeError):
    """Base for agent-loop failures."""


class StepCapExceededError(AgentError):
    """Agent ran out of loop iterations before producing a final response."""

    def __init__(self, message: str, exchanges: list | None = None) -> None:
        super().__init__(message)
        self.exchanges = exchanges or []


class SchemaViolationError(AgentError):
    """Structured response failed validation after the retry budget."""

    def __init__(self, schema_id: str, problems: list[str]) -> None:
        self.schema_id = schema_id
        self.problems = list(problems)
        super().__init__(
            f"response does not satisfy schema '{schema_id}': " + "; ".join(problems)
        )


class ToolError(SynthForgeError):
    """Base for tool registry and execution failures."""


class DuplicateToolError(ToolError):
    """A tool name was registered twice."""


class InterpreterNotFoundError(ToolError):
    """The configured code interpreter is not on this system."""


class StoreError(SynthForgeError):
    """Vector store and embedding failures."""


class EmptyTextError(StoreError):
    """Embedding requested for text with no tokens."""


class GraphDefinitionError(SynthForgeError):
    """A decision graph failed structural validation."""


class GraphExecutionError(SynthForgeError):
    """A node produced an outcome label with no matching edge."""


class PipelineError(SynthForgeError):
    """Base for pipeline-level failures."""


class NoQuestionsError(PipelineError):
    """Question generation produced an empty list."""


class InvalidDesignError(PipelineError):
    """System design failed structural validation after the corrective re-ask."""


class DesignNotApprovedError(PipelineError):
    """The design evaluation loop exhausted its cap without approval."""


class ModuleDesignFailedError(PipelineError):
    """A module design agent failed; partial outputs are preserved."""

    def __init__(self, module_name: str, cause: Exception) -> None:
        self.module_name = module_name
        self.cause = cause
        super().__init__(f"module '{module_name}' failed: {cause}")


class WorkspaceLockedError(SynthForgeError):
    """Another command holds the workspace lock."""
