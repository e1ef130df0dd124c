"""Report rendering: delimited output, figures, and trial selection.

The check and design commands write a CSV next to report.json and render
matplotlib figures to files in the same directory, so a run leaves both a
machine-readable summary and something a human can glance at.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .core_model import METRIC_NAMES
from .design_checks import (
    SEVERITY_ERROR,
    SEVERITY_WARNING,
    STATUS_FAIL,
    STATUS_PASS,
    STATUS_SKIPPED,
    CheckReport,
)

log = logging.getLogger(__name__)

_STATUS_COLORS = {
    STATUS_PASS: "#3a7d44",
    STATUS_FAIL: "#b02e2e",
    STATUS_SKIPPED: "#8a8a8a",
}


@dataclass(frozen=True)
class TrialResult:
    """One design trial's outcome, scored for best-of selection."""

    index: int
    manifest: Mapping[str, object]
    report: CheckReport

    @property
    def score(self) -> int:
        return self.report.automated_pass_count()

    @property
    def total_findings(self) -> int:
        return self.report.total_findings()


def select_best(trials: Sequence[TrialResult]) -> TrialResult:
    """Highest metric-pass score; ties by fewer findings, then lower index."""
    if not trials:
        raise ValueError("no trials to select from")
    return min(trials, key=lambda t: (-t.score, t.total_findings, t.index))


def write_report_csv(report: CheckReport, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["metric", "status", "errors", "warnings", "notes"])
        for name in METRIC_NAMES:
            result = report.metrics[name]
            errors = sum(
                1 for f in result.findings if f.severity == SEVERITY_ERROR
            )
            warnings = sum(
                1 for f in result.findings if f.severity == SEVERITY_WARNING
            )
            writer.writerow(
                [name, result.status, errors, warnings, " | ".join(result.notes)]
            )


def render_report_figure(report: CheckReport, path: Path) -> None:
    """Horizontal bars of finding counts, colored by metric status."""
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(METRIC_NAMES)
    counts = [len(report.metrics[name].findings) for name in names]
    colors = [
        _STATUS_COLORS.get(report.metrics[name].status, "#8a8a8a") for name in names
    ]

    fig, ax = plt.subplots(figsize=(7, 3.5))
    positions = range(len(names))
    ax.barh(list(positions), counts, color=colors)
    ax.set_yticks(list(positions))
    ax.set_yticklabels(names)
    ax.invert_yaxis()
    ax.set_xlabel("findings")
    ax.set_title("check results by metric")
    for pos, (name, count) in zip(positions, zip(names, counts)):
        ax.text(
            count + 0.05,
            pos,
            report.metrics[name].status,
            va="center",
            fontsize=8,
        )
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_trials_csv(trials: Sequence[TrialResult], best_index: int, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["trial", "score", "total_findings", "approved", "selected"])
        for trial in trials:
            writer.writerow(
                [
                    trial.index,
                    trial.score,
                    trial.total_findings,
                    bool(trial.manifest.get("approved", False)),
                    trial.index == best_index,
                ]
            )


def render_trials_figure(
    trials: Sequence[TrialResult], best_index: int, path: Path
) -> None:
    """Score bars per trial with the selected trial highlighted."""
    path.parent.mkdir(parents=True, exist_ok=True)
    indices = [trial.index for trial in trials]
    scores = [trial.score for trial in trials]
    colors = [
        "#2a6fb0" if trial.index == best_index else "#9dbbd6" for trial in trials
    ]

    fig, ax = plt.subplots(figsize=(6, 3))
    ax.bar([str(i) for i in indices], scores, color=colors)
    ax.set_xlabel("trial")
    ax.set_ylabel("passing metrics")
    ax.set_ylim(0, 5)
    ax.set_title(f"trial scores (selected: {best_index})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
