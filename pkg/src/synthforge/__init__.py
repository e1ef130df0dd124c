"""Agent-driven generator for modular HLS C++ projects.

Two LLM-backed pipelines run as decision graphs: one gathers domain
knowledge into a literature review, the other turns that review into a
multi-module hardware design with mechanical quality checks. Scripted and
replay backends make every control path reproducible offline.
"""

from .core_model import (
    DesignObjectives,
    LiteratureReview,
    METRIC_NAMES,
    ModuleArtifact,
    ModuleSpec,
    SystemDesignGraph,
    Verdict,
)
from .errors import SynthForgeError

__version__ = "0.1.0"

__all__ = [
    "DesignObjectives",
    "LiteratureReview",
    "METRIC_NAMES",
    "ModuleArtifact",
    "ModuleSpec",
    "SystemDesignGraph",
    "SynthForgeError",
    "Verdict",
    "__version__",
]
