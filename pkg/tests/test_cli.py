"""Command surface: scaffolding, full runs, checking, replay, exit codes."""

from __future__ import annotations

import json
import shutil

import pytest
from click.testing import CliRunner

from synthforge.cli import main

from testkit import CHECK_CORPUS, FFT_WORKSPACE

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def fft_copy(tmp_path):
    target = tmp_path / "ws"
    shutil.copytree(FFT_WORKSPACE, target)
    return target


def combined(result) -> str:
    return result.output + result.stderr


def write_minimal_workspace(root, responses, objectives=None) -> None:
    """Scripted workspace with just enough for a design-only run."""
    root.mkdir(parents=True, exist_ok=True)
    (root / "objectives.yaml").write_text(
        objectives
        or (
            "project_name: alphaproj\n"
            "goals:\n  - Produce one module\n"
            "requirements:\n  - Keep it small\n"
        ),
        "utf-8",
    )
    (root / "config.yaml").write_text(
        "backend: scripted\nscript_path: script.json\ntrials: 1\n",
        "utf-8",
    )
    (root / "script.json").write_text(
        json.dumps({"responses": responses}, indent=2), "utf-8"
    )


def tool_response(tool_name: str, arguments: dict) -> dict:
    return {"kind": "tool_call", "tool_name": tool_name, "arguments": arguments}


def module_arguments(name: str) -> dict:
    return {
        "name": name,
        "description": f"{name} module",
        "connections": [],
        "ports": ["input ap_uint<8> data"],
        "module_code": (
            f'#include "{name}.h"\n'
            f"void {name}_run() {{\n    int x = 1;\n    (void)x;\n}}\n"
        ),
        "header_file": f"void {name}_run();\n",
        "test_bench_code": (
            f'#include "{name}.h"\n'
            f"int main() {{\n    {name}_run();\n    return 0;\n}}\n"
        ),
    }


def design_only_script() -> list[dict]:
    plan = {
        "modules": [
            {
                "name": "alpha",
                "description": "alpha purpose",
                "connections": [],
                "ports": ["input ap_uint<8> data"],
                "template": "void alpha_run();",
            }
        ]
    }
    approve = {"satisfactory": True, "feedback": ""}
    return [
        tool_response("SystemDesignResponse", plan),
        tool_response("VerdictResponse", approve),
        tool_response("CodeModuleResponse", module_arguments("alpha")),
        tool_response("CodeModuleResponse", module_arguments("sys_top")),
        tool_response("VerdictResponse", approve),
    ]


class TestInit:
    def test_scaffolds_workspace(self, runner, tmp_path):
        target = tmp_path / "fresh"
        result = runner.invoke(main, ["init", str(target)])
        assert result.exit_code == 0
        assert f"workspace ready at {target}" in result.output
        assert (target / "objectives.yaml").is_file()
        assert (target / "config.yaml").is_file()
        assert (target / "knowledge" / "sources").is_dir()
        assert any((target / "templates").iterdir())

    def test_reinit_preserves_existing_files(self, runner, tmp_path):
        target = tmp_path / "fresh"
        runner.invoke(main, ["init", str(target)])
        (target / "objectives.yaml").write_text("project_name: kept\ngoals: [g]\nrequirements: [r]\n", "utf-8")
        result = runner.invoke(main, ["init", str(target)])
        assert result.exit_code == 0
        assert "kept" in (target / "objectives.yaml").read_text("utf-8")


class TestRun:
    def test_full_flow_on_scripted_workspace(self, runner, fft_copy):
        result = runner.invoke(main, ["run", str(fft_copy)])
        assert result.exit_code == 0, combined(result)
        assert "literature review written to" in result.output
        assert "(2 questions, 0 unverified)" in result.output
        assert "trial 0: score 4/5, 0 findings" in result.output
        assert "selected trial 0 (score 4/5)" in result.output

        assert (fft_copy / "knowledge" / "literature_review.md").is_file()
        manifest = json.loads(
            (fft_copy / "design" / "manifest.json").read_text("utf-8")
        )
        assert manifest["approved"] is True
        for name in ("report.json", "report.csv", "trials.csv"):
            assert (fft_copy / "design" / name).is_file()
        for name in ("report.png", "trials_scores.png"):
            blob = (fft_copy / "design" / name).read_bytes()
            assert blob[:8] == PNG_MAGIC
        assert (fft_copy / "design" / "best" / "manifest.json").is_file()
        assert (fft_copy / "transcripts" / "knowledge").is_dir()
        assert (fft_copy / "transcripts" / "design").is_dir()
        assert not (fft_copy / ".lock").exists()

    def test_gather_alone(self, runner, fft_copy):
        result = runner.invoke(main, ["gather", str(fft_copy)])
        assert result.exit_code == 0, combined(result)
        assert "(2 questions, 0 unverified)" in result.output
        assert (fft_copy / "knowledge" / "literature_review.md").is_file()

    def test_missing_objectives_is_usage_error(self, runner, tmp_path):
        bare = tmp_path / "bare"
        bare.mkdir()
        result = runner.invoke(main, ["gather", str(bare)])
        assert result.exit_code == 2
        assert "objectives file not found" in combined(result)

    def test_design_requires_review(self, runner, fft_copy):
        result = runner.invoke(main, ["design", str(fft_copy)])
        assert result.exit_code == 2
        assert "pass --no-review" in combined(result)

    def test_design_no_review(self, runner, tmp_path):
        ws = tmp_path / "mini"
        write_minimal_workspace(ws, design_only_script())
        result = runner.invoke(main, ["design", str(ws), "--no-review"])
        assert result.exit_code == 0, combined(result)
        assert "trial 0: score 4/5, 0 findings" in result.output
        assert (ws / "design" / "best" / "modules" / "alpha" / "alpha.cpp").is_file()

    def test_all_trials_failed(self, runner, tmp_path):
        ws = tmp_path / "mini"
        bad_plan = {
            "modules": [
                {
                    "name": "alpha",
                    "description": "first",
                    "connections": [],
                    "ports": ["input ap_uint<8> data"],
                    "template": "void alpha_run();",
                },
                {
                    "name": "alpha",
                    "description": "duplicate",
                    "connections": [],
                    "ports": ["input ap_uint<8> data"],
                    "template": "void alpha_run();",
                },
            ]
        }
        write_minimal_workspace(
            ws,
            [
                tool_response("SystemDesignResponse", bad_plan),
                tool_response("SystemDesignResponse", bad_plan),
            ],
        )
        result = runner.invoke(main, ["design", str(ws), "--no-review"])
        assert result.exit_code == 1
        assert "trial 0: failed (InvalidDesignError" in combined(result)
        assert "all trials failed" in combined(result)

    def test_trials_flag_lower_bound(self, runner, fft_copy):
        result = runner.invoke(
            main, ["design", str(fft_copy), "--no-review", "--trials", "0"]
        )
        assert result.exit_code == 2
        assert "--trials must be >= 1" in combined(result)

    def test_parallel_rejected_for_scripted_backend(self, runner, fft_copy):
        result = runner.invoke(
            main, ["design", str(fft_copy), "--no-review", "--parallel"]
        )
        assert result.exit_code == 2
        assert "scripted runs are ordered" in combined(result)

    def test_lock_file_blocks_commands(self, runner, fft_copy):
        (fft_copy / ".lock").write_text("12345\n", "ascii")
        result = runner.invoke(main, ["gather", str(fft_copy)])
        assert result.exit_code == 2
        assert "workspace busy" in combined(result)


class TestCheck:
    def _corpus_copy(self, tmp_path, name: str):
        target = tmp_path / name
        shutil.copytree(CHECK_CORPUS / name, target)
        return target

    def test_clean_design_passes(self, runner, tmp_path):
        target = self._corpus_copy(tmp_path, "clean_wired")
        result = runner.invoke(main, ["check", str(target)])
        assert result.exit_code == 0, combined(result)
        assert "metric           status   findings" in result.output
        assert (target / "report.json").is_file()
        assert (target / "report.csv").is_file()
        assert (target / "report.png").read_bytes()[:8] == PNG_MAGIC

    def test_broken_design_fails(self, runner, tmp_path):
        target = self._corpus_copy(tmp_path, "width_mismatch")
        result = runner.invoke(main, ["check", str(target)])
        assert result.exit_code == 1
        assert "failed metrics: interface" in combined(result)

    def test_missing_directory_is_usage_error(self, runner, tmp_path):
        result = runner.invoke(main, ["check", str(tmp_path / "nowhere")])
        assert result.exit_code == 2
        assert "design directory not found" in combined(result)


class TestReplay:
    def test_round_trip_matches(self, runner, fft_copy):
        run = runner.invoke(main, ["run", str(fft_copy)])
        assert run.exit_code == 0, combined(run)
        result = runner.invoke(main, ["replay", str(fft_copy)])
        assert result.exit_code == 0, combined(result)
        assert "replay matched" in result.output
        assert not (fft_copy / ".replay").exists()

    def test_tampered_transcript_is_detected(self, runner, fft_copy, tmp_path):
        run = runner.invoke(main, ["run", str(fft_copy)])
        assert run.exit_code == 0, combined(run)

        tampered = tmp_path / "tampered"
        shutil.copytree(fft_copy / "transcripts", tampered)
        target = tampered / "knowledge" / "question_gen" / "0.jsonl"
        lines = target.read_text("utf-8").splitlines()
        entry = json.loads(lines[0])
        role, text = entry["request"]["messages"][-1]
        entry["request"]["messages"][-1] = [role, text + " TAMPERED"]
        lines[0] = json.dumps(entry)
        target.write_text("\n".join(lines) + "\n", "utf-8")

        result = runner.invoke(main, ["replay", str(fft_copy), str(tampered)])
        assert result.exit_code == 3
        assert "replay mismatch at sequence 0" in combined(result)

    def test_missing_transcripts_is_usage_error(self, runner, fft_copy):
        result = runner.invoke(main, ["replay", str(fft_copy)])
        assert result.exit_code == 2
        assert "transcript directory not found" in combined(result)
