"""Mechanized design rubric: port parsing, interface matching, completeness,
pragma inventory, and syntax heuristics, aggregated into a six-metric report.

Checks run over either an in-memory design or a design directory on disk.
There is no full C++ parser here; everything is line-structural by intent,
with an external tool hook for real compilers and synthesizers. Findings
carry a severity: only error-severity findings fail a metric, warnings are
advisory.
"""

from __future__ import annotations

import logging
import re
import shlex
import shutil
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .core_model import (
    METRIC_NAMES,
    ModuleArtifact,
    SystemDesignGraph,
    validate_system_design,
)
from .util import read_json

log = logging.getLogger(__name__)

STATUS_PASS = "pass"
STATUS_FAIL = "fail"
STATUS_SKIPPED = "skipped"

SEVERITY_ERROR = "error"
SEVERITY_WARNING = "warning"

PLACEHOLDER_MARKER = "PLACEHOLDER:"
AUTOMATED_METRICS = (
    "syntax",
    "interface",
    "completeness",
    "optimization",
    "synthesizable",
)

DIRECTION_KEYWORDS = {
    "input": "in",
    "in": "in",
    "output": "out",
    "out": "out",
    "inout": "inout",
}
CLOCK_NAMES = {"clk", "clock"}
RESET_NAMES = {"rst", "reset", "rst_n", "resetn", "aresetn"}

_RANGE_RE = re.compile(r"\[\s*(\d+)\s*:\s*(\d+)\s*\]")
_AP_TYPE_RE = re.compile(r"^ap_(?:u?int|u?fixed)\s*<\s*(\d+)")
_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_PRAGMA_RE = re.compile(r"#pragma\s+HLS\s+(\w+)(.*)", re.IGNORECASE)
_PRAGMA_VAR_RE = re.compile(r"variable\s*=\s*([A-Za-z_]\w*)", re.IGNORECASE)
_FUNC_DEF_RE = re.compile(
    r"^[ \t]*(?:template\s*<[^>]*>\s*)?"
    r"(?:[A-Za-z_][\w:<>,*&\s]*?[\s*&])"
    r"([A-Za-z_]\w*)\s*\([^;{)]*\)\s*(?:const\s*)?\{",
    re.MULTILINE,
)
_EMPTY_BODY_RE = re.compile(r"\)\s*(?:const\s*)?\{\s*\}")
_STUB_BODY_RE = re.compile(r"\)\s*(?:const\s*)?\{\s*return\s+0\s*;\s*\}")
_MAIN_RE = re.compile(r"\bint\s+main\s*\(")

FIXED_WIDTH_TYPES = {
    "bool": 1,
    "char": 8,
    "unsigned char": 8,
    "short": 16,
    "unsigned short": 16,
    "int": 32,
    "unsigned": 32,
    "unsigned int": 32,
    "long": 64,
    "unsigned long": 64,
    "long long": 64,
    "float": 32,
    "double": 64,
}

OPTIMIZATION_PRAGMAS = {"PIPELINE", "UNROLL", "ARRAY_PARTITION", "DATAFLOW"}
KNOWN_PRAGMAS = {"PIPELINE", "UNROLL", "ARRAY_PARTITION", "INTERFACE", "DATAFLOW"}

_NOT_FUNCTIONS = {"if", "for", "while", "switch", "return", "else", "do", "sizeof"}


@dataclass(frozen=True)
class PortDecl:
    """One parsed port; raw text is always preserved."""

    name: str
    direction: str
    width_bits: int | None
    type_name: str | None
    raw: str

    @property
    def parsed(self) -> bool:
        return self.direction != "unknown" or bool(self.name)


def parse_port(raw: str) -> PortDecl:
    """Tolerant grammar: [direction] [type] name [msb:lsb]; never raises."""
    text = raw.strip()
    width_from_range: int | None = None
    range_match = _RANGE_RE.search(text)
    if range_match:
        msb, lsb = int(range_match.group(1)), int(range_match.group(2))
        width_from_range = abs(msb - lsb) + 1
        text = (text[: range_match.start()] + " " + text[range_match.end() :]).strip()

    tokens = text.split()
    if not tokens:
        return PortDecl("", "unknown", None, None, raw)

    direction = ""
    if tokens[0].lower() in DIRECTION_KEYWORDS:
        direction = DIRECTION_KEYWORDS[tokens[0].lower()]
        tokens = tokens[1:]
    if not tokens:
        return PortDecl("", "unknown", None, None, raw)

    name = tokens[-1]
    type_tokens = tokens[:-1]
    if not _IDENT_RE.match(name):
        return PortDecl("", "unknown", None, None, raw)

    type_name = " ".join(type_tokens) if type_tokens else None
    if not direction:
        lowered = name.lower()
        if lowered in CLOCK_NAMES:
            direction = "clock"
        elif lowered in RESET_NAMES:
            direction = "reset"
        else:
            direction = "unknown"

    width = width_from_range
    if width is None and type_name is not None:
        ap_match = _AP_TYPE_RE.match(type_name.replace(" ", ""))
        if ap_match:
            width = int(ap_match.group(1))
        elif type_name.lower() in FIXED_WIDTH_TYPES:
            width = FIXED_WIDTH_TYPES[type_name.lower()]
    if width is None:
        width = 1
    return PortDecl(name=name, direction=direction, width_bits=width,
                    type_name=type_name, raw=raw)


@dataclass(frozen=True)
class Finding:
    file: str
    line: int
    message: str
    severity: str = SEVERITY_ERROR

    def to_dict(self) -> dict[str, Any]:
        return {
            "file": self.file,
            "line": self.line,
            "message": self.message,
            "severity": self.severity,
        }

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> "Finding":
        return cls(
            file=str(raw.get("file", "")),
            line=int(raw.get("line", 0)),
            message=str(raw.get("message", "")),
            severity=str(raw.get("severity", SEVERITY_ERROR)),
        )


@dataclass(frozen=True)
class ToolHook:
    """External command run per file; pass = exit 0 and no error-pattern hit."""

    command: tuple[str, ...]
    error_pattern: str = r"(?i)error"

    def __post_init__(self) -> None:
        if not self.command:
            raise ValueError("hook command template must be nonempty")

    @classmethod
    def from_string(cls, template: str, error_pattern: str = r"(?i)error") -> "ToolHook":
        return cls(tuple(shlex.split(template)), error_pattern)

    def available(self) -> bool:
        binary = self.command[0]
        return shutil.which(binary) is not None or Path(binary).exists()

    def run(self, file_path: Path, timeout_s: float = 120.0) -> tuple[bool, str]:
        argv = [part.replace("{file}", str(file_path)) for part in self.command]
        proc = subprocess.run(
            argv, capture_output=True, text=True, timeout=timeout_s
        )
        hit = re.search(self.error_pattern, proc.stderr or "")
        ok = proc.returncode == 0 and hit is None
        detail = (proc.stderr or proc.stdout or "").strip()
        return ok, detail


@dataclass(frozen=True)
class MetricResult:
    status: str
    findings: tuple[Finding, ...] = ()
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "status": self.status,
            "findings": [finding.to_dict() for finding in self.findings],
            "notes": list(self.notes),
        }

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> "MetricResult":
        return cls(
            status=str(raw.get("status", STATUS_SKIPPED)),
            findings=tuple(
                Finding.from_mapping(item) for item in raw.get("findings", ())
            ),
            notes=tuple(str(note) for note in raw.get("notes", ())),
        )


@dataclass(frozen=True)
class CheckReport:
    metrics: Mapping[str, MetricResult]

    def __post_init__(self) -> None:
        missing = set(METRIC_NAMES) - set(self.metrics)
        extra = set(self.metrics) - set(METRIC_NAMES)
        if missing or extra:
            raise ValueError(
                f"report must carry exactly the six metrics; "
                f"missing={sorted(missing)} extra={sorted(extra)}"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "metrics": {
                name: self.metrics[name].to_dict() for name in METRIC_NAMES
            }
        }

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> "CheckReport":
        return cls(
            metrics={
                name: MetricResult.from_mapping(result)
                for name, result in raw.get("metrics", {}).items()
            }
        )

    def automated_pass_count(self) -> int:
        return sum(
            1
            for name in AUTOMATED_METRICS
            if self.metrics[name].status == STATUS_PASS
        )

    def total_findings(self) -> int:
        return sum(len(result.findings) for result in self.metrics.values())

    def failed_automated(self) -> list[str]:
        return [
            name
            for name in AUTOMATED_METRICS
            if self.metrics[name].status == STATUS_FAIL
        ]


def _status_from(findings: Sequence[Finding]) -> str:
    errors = [f for f in findings if f.severity == SEVERITY_ERROR]
    return STATUS_FAIL if errors else STATUS_PASS


@dataclass(frozen=True)
class FileEntry:
    path: str
    text: str
    kind: str
    module: str


@dataclass(frozen=True)
class CheckSubject:
    """What the checks look at: the plan plus every artifact's file texts."""

    graph: SystemDesignGraph | None
    artifacts: Mapping[str, ModuleArtifact]
    top: ModuleArtifact | None = None

    def files(self) -> list[FileEntry]:
        entries: list[FileEntry] = []
        for name in sorted(self.artifacts):
            artifact = self.artifacts[name]
            base = f"modules/{name}/{name}"
            entries.append(FileEntry(f"{base}.cpp", artifact.module_code, "code", name))
            entries.append(FileEntry(f"{base}.h", artifact.header_file, "header", name))
            entries.append(
                FileEntry(f"{base}_tb.cpp", artifact.test_bench_code, "testbench", name)
            )
        if self.top is not None:
            base = f"modules/top/{self.top.name}"
            entries.append(
                FileEntry(f"{base}.cpp", self.top.module_code, "code", self.top.name)
            )
            entries.append(
                FileEntry(f"{base}.h", self.top.header_file, "header", self.top.name)
            )
            entries.append(
                FileEntry(
                    f"{base}_tb.cpp", self.top.test_bench_code, "testbench",
                    self.top.name,
                )
            )
        return entries

    @classmethod
    def from_dir(cls, design_dir: Path) -> "CheckSubject":
        graph = None
        graph_path = design_dir / "system_design.json"
        if graph_path.is_file():
            graph = SystemDesignGraph.from_mapping(read_json(graph_path))
        artifacts: dict[str, ModuleArtifact] = {}
        top: ModuleArtifact | None = None
        modules_dir = design_dir / "modules"
        if modules_dir.is_dir():
            for entry in sorted(modules_dir.iterdir()):
                if not entry.is_dir():
                    continue
                artifact = _artifact_from_dir(entry)
                if artifact is None:
                    continue
                if entry.name == "top":
                    top = artifact
                else:
                    artifacts[artifact.name] = artifact
        return cls(graph=graph, artifacts=artifacts, top=top)


def _artifact_from_dir(module_dir: Path) -> ModuleArtifact | None:
    code_files = sorted(module_dir.glob("*.cpp"))
    body = header = bench = ""
    name = module_dir.name
    for path in code_files:
        if path.stem.endswith("_tb"):
            bench = path.read_text("utf-8")
        else:
            body = path.read_text("utf-8")
            name = path.stem
    headers = sorted(module_dir.glob("*.h"))
    if headers:
        header = headers[0].read_text("utf-8")
    if not (body or header or bench):
        return None
    ports: tuple[str, ...] = ()
    connections: tuple[str, ...] = ()
    return ModuleArtifact(
        name=name,
        description="",
        connections=connections,
        ports=ports,
        module_code=body,
        header_file=header,
        test_bench_code=bench,
    )


@dataclass(frozen=True)
class CheckConfig:
    optimization_requested: bool = False
    syntax_hook: ToolHook | None = None
    synth_hook: ToolHook | None = None
    hook_workdir: Path | None = None


def _port_table(subject: CheckSubject) -> dict[str, dict[str, PortDecl]]:
    """Module name -> port name -> parsed decl, preferring graph port lists."""
    table: dict[str, dict[str, PortDecl]] = {}
    sources: dict[str, Sequence[str]] = {}
    if subject.graph is not None:
        for module in subject.graph.modules:
            sources[module.name] = module.ports
    for name, artifact in subject.artifacts.items():
        if name not in sources or not sources[name]:
            sources[name] = artifact.ports
    for name, raw_ports in sources.items():
        decls: dict[str, PortDecl] = {}
        for raw in raw_ports:
            decl = parse_port(raw)
            if decl.name:
                decls[decl.name] = decl
        table[name] = decls
    return table


def _connection_pairs(subject: CheckSubject) -> tuple[dict[str, tuple[str, ...]], list[tuple[str, str]]]:
    connections: dict[str, tuple[str, ...]] = {}
    if subject.graph is not None:
        for module in subject.graph.modules:
            connections[module.name] = module.connections
    else:
        for name, artifact in subject.artifacts.items():
            connections[name] = artifact.connections
    pairs: set[tuple[str, str]] = set()
    for name, targets in connections.items():
        for target in targets:
            if target == name or target not in connections:
                continue
            pairs.add(tuple(sorted((name, target))))
    return connections, sorted(pairs)


def check_interfaces(subject: CheckSubject) -> list[Finding]:
    """Width/type agreement for every shared port name on connected pairs."""
    findings: list[Finding] = []
    table = _port_table(subject)
    connections, pairs = _connection_pairs(subject)

    for name, targets in sorted(connections.items()):
        for target in targets:
            if target == name:
                continue
            if target not in connections:
                findings.append(
                    Finding(
                        file="system_design.json",
                        line=0,
                        message=(
                            f"module '{name}' connects to unknown module "
                            f"'{target}'"
                        ),
                        severity=SEVERITY_ERROR,
                    )
                )
            elif name not in connections.get(target, ()):
                findings.append(
                    Finding(
                        file="system_design.json",
                        line=0,
                        message=(
                            f"asymmetric connection: '{name}' lists '{target}' "
                            f"but '{target}' does not list '{name}'"
                        ),
                        severity=SEVERITY_WARNING,
                    )
                )

    for left, right in pairs:
        left_ports = table.get(left, {})
        right_ports = table.get(right, {})
        for port_name in sorted(set(left_ports) & set(right_ports)):
            a, b = left_ports[port_name], right_ports[port_name]
            if a.width_bits is None or b.width_bits is None:
                findings.append(
                    Finding(
                        file="system_design.json",
                        line=0,
                        message=(
                            f"port '{port_name}' shared by '{left}' and "
                            f"'{right}' has an unparseable declaration"
                        ),
                        severity=SEVERITY_WARNING,
                    )
                )
                continue
            if a.width_bits != b.width_bits:
                findings.append(
                    Finding(
                        file="system_design.json",
                        line=0,
                        message=(
                            f"width mismatch on port '{port_name}': "
                            f"'{left}' declares {a.width_bits} bits, "
                            f"'{right}' declares {b.width_bits} bits"
                        ),
                    )
                )
            if (
                a.type_name is not None
                and b.type_name is not None
                and a.type_name.replace(" ", "") != b.type_name.replace(" ", "")
            ):
                findings.append(
                    Finding(
                        file="system_design.json",
                        line=0,
                        message=(
                            f"type mismatch on port '{port_name}': "
                            f"'{left}' declares {a.type_name!r}, "
                            f"'{right}' declares {b.type_name!r}"
                        ),
                    )
                )
    return findings


def check_completeness(subject: CheckSubject) -> list[Finding]:
    """Placeholders, empty bodies, missing pieces, and absent artifacts."""
    findings: list[Finding] = []
    for entry in subject.files():
        for lineno, line in enumerate(entry.text.splitlines(), start=1):
            if PLACEHOLDER_MARKER in line:
                findings.append(
                    Finding(
                        file=entry.path,
                        line=lineno,
                        message=f"placeholder marker: {line.strip()}",
                    )
                )
        if entry.kind == "code":
            if not entry.text.strip():
                findings.append(
                    Finding(entry.path, 0, "module code file is empty")
                )
            else:
                for match in _EMPTY_BODY_RE.finditer(entry.text):
                    findings.append(
                        Finding(
                            entry.path,
                            entry.text.count("\n", 0, match.start()) + 1,
                            "empty function body",
                        )
                    )
                for match in _STUB_BODY_RE.finditer(entry.text):
                    findings.append(
                        Finding(
                            entry.path,
                            entry.text.count("\n", 0, match.start()) + 1,
                            "stub function body (only 'return 0;')",
                        )
                    )
        if entry.kind == "header" and not entry.text.strip():
            findings.append(Finding(entry.path, 0, "header file is empty"))
        if entry.kind == "testbench":
            if not entry.text.strip():
                findings.append(Finding(entry.path, 0, "testbench file is empty"))
            elif not _MAIN_RE.search(entry.text):
                findings.append(
                    Finding(
                        entry.path, 0, "testbench lacks an int-returning main"
                    )
                )
    if subject.graph is not None:
        for module in subject.graph.modules:
            if module.name not in subject.artifacts:
                findings.append(
                    Finding(
                        file="system_design.json",
                        line=0,
                        message=(
                            f"module '{module.name}' is declared in the plan "
                            "but has no artifact"
                        ),
                    )
                )
    return findings


@dataclass(frozen=True)
class PragmaEntry:
    file: str
    line: int
    directive: str
    kind: str
    argument_text: str


def inventory_pragmas(subject: CheckSubject) -> list[PragmaEntry]:
    entries: list[PragmaEntry] = []
    for entry in subject.files():
        for lineno, line in enumerate(entry.text.splitlines(), start=1):
            match = _PRAGMA_RE.search(line)
            if not match:
                continue
            directive = match.group(1).upper()
            kind = directive if directive in KNOWN_PRAGMAS else "other"
            entries.append(
                PragmaEntry(
                    file=entry.path,
                    line=lineno,
                    directive=directive,
                    kind=kind,
                    argument_text=match.group(2).strip(),
                )
            )
    return entries


def _declared_in_file(text: str, variable: str) -> bool:
    """Crude declaration probe: the name appears outside pragma lines."""
    pattern = re.compile(rf"\b{re.escape(variable)}\b")
    for line in text.splitlines():
        if _PRAGMA_RE.search(line):
            continue
        if pattern.search(line):
            return True
    return False


def check_optimization(
    subject: CheckSubject, optimization_requested: bool = False
) -> tuple[list[Finding], list[PragmaEntry]]:
    """Pragma inventory plus superfluous-directive detection.

    The metric itself fails only when optimization was requested and no
    optimization pragma exists anywhere; directives naming variables that
    are never declared are reported as warning findings.
    """
    findings: list[Finding] = []
    pragmas = inventory_pragmas(subject)
    texts = {entry.path: entry.text for entry in subject.files()}
    for pragma in pragmas:
        var_match = _PRAGMA_VAR_RE.search(pragma.argument_text)
        if var_match:
            variable = var_match.group(1)
            if not _declared_in_file(texts.get(pragma.file, ""), variable):
                findings.append(
                    Finding(
                        file=pragma.file,
                        line=pragma.line,
                        message=(
                            f"superfluous directive: {pragma.directive} names "
                            f"variable '{variable}' which is never declared"
                        ),
                        severity=SEVERITY_WARNING,
                    )
                )
    optimization_count = sum(
        1 for pragma in pragmas if pragma.kind in OPTIMIZATION_PRAGMAS
    )
    if optimization_requested and optimization_count == 0:
        findings.append(
            Finding(
                file="",
                line=0,
                message=(
                    "objectives request optimization but no optimization "
                    "pragma (PIPELINE/UNROLL/ARRAY_PARTITION/DATAFLOW) exists"
                ),
            )
        )
    return findings, pragmas


def _balanced(text: str, open_ch: str, close_ch: str) -> bool:
    depth = 0
    for ch in text:
        if ch == open_ch:
            depth += 1
        elif ch == close_ch:
            depth -= 1
            if depth < 0:
                return False
    return depth == 0


def _function_names(text: str) -> list[tuple[str, int]]:
    names: list[tuple[str, int]] = []
    for match in _FUNC_DEF_RE.finditer(text):
        name = match.group(1)
        if name in _NOT_FUNCTIONS:
            continue
        names.append((name, text.count("\n", 0, match.start()) + 1))
    return names


def check_syntax(
    subject: CheckSubject, hook: ToolHook | None = None
) -> tuple[list[Finding], list[str]]:
    """External tool when hooked, line-structural heuristics otherwise."""
    findings: list[Finding] = []
    notes: list[str] = []
    if hook is not None:
        if not hook.available():
            notes.append(f"syntax hook not found: {hook.command[0]}")
            return findings, notes
        import tempfile

        with tempfile.TemporaryDirectory(prefix="synthforge-check-") as tmp:
            root = Path(tmp)
            for entry in subject.files():
                file_path = root / entry.path
                file_path.parent.mkdir(parents=True, exist_ok=True)
                file_path.write_text(entry.text, encoding="utf-8")
            for entry in subject.files():
                if entry.kind == "header":
                    continue
                ok, detail = hook.run(root / entry.path)
                if not ok:
                    findings.append(
                        Finding(
                            file=entry.path,
                            line=0,
                            message=f"external tool reported: {detail[:500]}",
                        )
                    )
        return findings, notes

    notes.append("no external tool configured; heuristic checks only")
    seen_functions: dict[str, tuple[str, int]] = {}
    for entry in subject.files():
        if entry.text.strip() and not _balanced(entry.text, "{", "}"):
            findings.append(Finding(entry.path, 0, "unbalanced braces"))
        if entry.text.strip() and not _balanced(entry.text, "(", ")"):
            findings.append(Finding(entry.path, 0, "unbalanced parentheses"))
        if entry.kind == "code" and entry.text.strip():
            own_header = f'#include "{entry.module}.h"'
            if own_header not in entry.text:
                findings.append(
                    Finding(
                        entry.path,
                        0,
                        f"module code does not include its own header "
                        f"({entry.module}.h)",
                    )
                )
        if entry.kind in ("code", "header"):
            for name, line in _function_names(entry.text):
                if name == "main":
                    continue
                if name in seen_functions:
                    prev_file, prev_line = seen_functions[name]
                    findings.append(
                        Finding(
                            entry.path,
                            line,
                            f"duplicate definition of '{name}()' "
                            f"(also defined at {prev_file}:{prev_line})",
                        )
                    )
                else:
                    seen_functions[name] = (entry.path, line)
    return findings, notes


def check_synthesizable(
    subject: CheckSubject, hook: ToolHook | None = None
) -> tuple[str, list[Finding], list[str]]:
    if hook is None:
        return (
            STATUS_SKIPPED,
            [],
            ["no synthesis hook configured; metric skipped"],
        )
    if not hook.available():
        return (
            STATUS_SKIPPED,
            [],
            [f"synthesis hook not found: {hook.command[0]}"],
        )
    findings: list[Finding] = []
    import tempfile

    with tempfile.TemporaryDirectory(prefix="synthforge-synth-") as tmp:
        root = Path(tmp)
        for entry in subject.files():
            file_path = root / entry.path
            file_path.parent.mkdir(parents=True, exist_ok=True)
            file_path.write_text(entry.text, encoding="utf-8")
        for entry in subject.files():
            if entry.kind != "code":
                continue
            ok, detail = hook.run(root / entry.path)
            if not ok:
                findings.append(
                    Finding(
                        file=entry.path,
                        line=0,
                        message=f"synthesis hook reported: {detail[:500]}",
                    )
                )
    return _status_from(findings), findings, []


def check_system_design(subject: CheckSubject) -> tuple[str, list[Finding], list[str]]:
    """Structural validations; the semantic verdict stays with a human."""
    if subject.graph is None:
        return STATUS_SKIPPED, [], ["no system_design.json present"]
    findings = [
        Finding(
            file="system_design.json",
            line=0,
            message=f"{violation.rule}: {violation.module} {violation.detail}".strip(),
        )
        for violation in validate_system_design(subject.graph)
    ]
    if findings:
        return STATUS_FAIL, findings, []
    return (
        STATUS_SKIPPED,
        [],
        [
            "needs-human-review: structural checks passed; logical soundness "
            "of the module graph requires human judgement"
        ],
    )


def report(subject: CheckSubject, config: CheckConfig | None = None) -> CheckReport:
    """Run every check and aggregate the six-metric report."""
    config = config or CheckConfig()

    sd_status, sd_findings, sd_notes = check_system_design(subject)
    syntax_findings, syntax_notes = check_syntax(subject, config.syntax_hook)
    if config.syntax_hook is not None and not config.syntax_hook.available():
        syntax_result = MetricResult(
            STATUS_SKIPPED, tuple(syntax_findings), tuple(syntax_notes)
        )
    else:
        syntax_result = MetricResult(
            _status_from(syntax_findings), tuple(syntax_findings), tuple(syntax_notes)
        )
    interface_findings = check_interfaces(subject)
    completeness_findings = check_completeness(subject)
    optimization_findings, pragmas = check_optimization(
        subject, config.optimization_requested
    )
    optimization_notes = [
        f"pragma inventory: {len(pragmas)} total "
        f"({sum(1 for p in pragmas if p.kind in OPTIMIZATION_PRAGMAS)} optimization)"
    ]
    synth_status, synth_findings, synth_notes = check_synthesizable(
        subject, config.synth_hook
    )

    return CheckReport(
        metrics={
            "system_design": MetricResult(
                sd_status, tuple(sd_findings), tuple(sd_notes)
            ),
            "syntax": syntax_result,
            "interface": MetricResult(
                _status_from(interface_findings), tuple(interface_findings), ()
            ),
            "completeness": MetricResult(
                _status_from(completeness_findings),
                tuple(completeness_findings),
                (),
            ),
            "optimization": MetricResult(
                _status_from(optimization_findings),
                tuple(optimization_findings),
                tuple(optimization_notes),
            ),
            "synthesizable": MetricResult(
                synth_status, tuple(synth_findings), tuple(synth_notes)
            ),
        }
    )


def render_report_table(check_report: CheckReport) -> str:
    """Fixed-width table for terminal output."""
    lines = [f"{'metric':<16} {'status':<8} findings"]
    lines.append("-" * 44)
    for name in METRIC_NAMES:
        result = check_report.metrics[name]
        lines.append(f"{name:<16} {result.status:<8} {len(result.findings)}")
    for name in METRIC_NAMES:
        result = check_report.metrics[name]
        for finding in result.findings:
            where = f"{finding.file}:{finding.line}" if finding.file else "-"
            lines.append(f"  [{name}/{finding.severity}] {where} {finding.message}")
        for note in result.notes:
            lines.append(f"  [{name}/note] {note}")
    return "\n".join(lines)
