"""Regenerates the design-checker corpus under tests/fixtures/check_corpus/.

Each corpus entry is one design directory in the layout the checker loads
(system_design.json plus modules/<name>/ file triples) together with an
expected.json recording which metrics must fail, which findings must appear,
and the exact number of error-severity findings. The two clean entries pin
the false-positive rate at zero.

Run from the repository root:

    python3 tests/fixtures/build_check_corpus.py
"""

from __future__ import annotations

import json
import shutil
from pathlib import Path

CORPUS = Path(__file__).resolve().parent / "check_corpus"


def clean_module(name: str, body: str = "") -> dict[str, str]:
    """A module triple that every heuristic accepts."""
    guard = f"{name.upper()}_H"
    default_body = f"""    ap_uint<8> shifted = (ap_uint<8>)(sample + 1);
    out = shifted;
"""
    header = f"""#ifndef {guard}
#define {guard}

#include "ap_int.h"

void {name}(ap_uint<8> sample, ap_uint<8> &out);

#endif
"""
    code = f"""#include "{name}.h"

void {name}(ap_uint<8> sample, ap_uint<8> &out) {{
#pragma HLS PIPELINE II=1
{body or default_body}}}
"""
    testbench = f"""#include "{name}.h"
#include <cstdio>

int main() {{
    ap_uint<8> out = 0;
    {name}(ap_uint<8>(41), out);
    std::printf("{name} produced %u\\n", (unsigned)out);
    return 0;
}}
"""
    return {"code": code, "header": header, "testbench": testbench}


def graph(*modules: dict) -> dict:
    return {"modules": list(modules)}


def mod(name: str, connections: list[str], ports: list[str]) -> dict:
    return {
        "name": name,
        "description": f"{name} stage of the datapath",
        "connections": connections,
        "ports": ports,
        "template": f"Implement the {name} stage as a pipelined function.",
    }


def expect(
    failed: list[str],
    findings: list[dict] | None = None,
    error_count: int = 0,
    total_findings: int | None = None,
) -> dict:
    out: dict = {
        "failed_metrics": sorted(failed),
        "expected_findings": findings or [],
        "error_findings": error_count,
    }
    if total_findings is not None:
        out["total_findings"] = total_findings
    return out


def finding(metric: str, severity: str, contains: str) -> dict:
    return {"metric": metric, "severity": severity, "contains": contains}


def design_clean_single() -> tuple[dict, dict]:
    files = {
        "system_design.json": graph(
            mod("accum", [], ["input ap_uint<8> sample", "output ap_uint<8> out"])
        ),
        "modules/accum": clean_module("accum"),
    }
    return files, expect([], error_count=0, total_findings=0)


def design_clean_wired() -> tuple[dict, dict]:
    files = {
        "system_design.json": graph(
            mod(
                "source_unit",
                ["sink_unit"],
                ["input ap_uint<8> sample", "output ap_uint<8> data"],
            ),
            mod(
                "sink_unit",
                ["source_unit"],
                ["input ap_uint<8> data", "output ap_uint<8> out"],
            ),
        ),
        "modules/source_unit": clean_module("source_unit"),
        "modules/sink_unit": clean_module("sink_unit"),
        "modules/top": clean_module("chain_top"),
    }
    return files, expect([], error_count=0, total_findings=0)


def design_width_mismatch() -> tuple[dict, dict]:
    files = {
        "system_design.json": graph(
            mod("wide_src", ["narrow_dst"], ["output ap_uint<16> data"]),
            mod("narrow_dst", ["wide_src"], ["input ap_uint<8> data"]),
        ),
        "modules/wide_src": clean_module("wide_src"),
        "modules/narrow_dst": clean_module("narrow_dst"),
    }
    # Differing ap_uint widths trip both the width and the type comparison;
    # the pure-type case lives in design_type_mismatch.
    return files, expect(
        ["interface"],
        [
            finding("interface", "error", "width mismatch on port 'data'"),
            finding("interface", "error", "type mismatch on port 'data'"),
        ],
        error_count=2,
    )


def design_type_mismatch() -> tuple[dict, dict]:
    files = {
        "system_design.json": graph(
            mod("signed_src", ["unsigned_dst"], ["output ap_int<8> data"]),
            mod("unsigned_dst", ["signed_src"], ["input ap_uint<8> data"]),
        ),
        "modules/signed_src": clean_module("signed_src"),
        "modules/unsigned_dst": clean_module("unsigned_dst"),
    }
    return files, expect(
        ["interface"],
        [finding("interface", "error", "type mismatch on port 'data'")],
        error_count=1,
    )


def design_placeholder() -> tuple[dict, dict]:
    body = """    // PLACEHOLDER: implement the filter kernel
    out = sample;
"""
    files = {
        "system_design.json": graph(
            mod("filter_stage", [], ["input ap_uint<8> sample", "output ap_uint<8> out"])
        ),
        "modules/filter_stage": clean_module("filter_stage", body),
    }
    return files, expect(
        ["completeness"],
        [finding("completeness", "error", "placeholder marker")],
        error_count=1,
    )


def design_empty_body() -> tuple[dict, dict]:
    module = clean_module("drain_stage")
    module["code"] += """
void flush_state() {
}
"""
    files = {
        "system_design.json": graph(
            mod("drain_stage", [], ["input ap_uint<8> sample", "output ap_uint<8> out"])
        ),
        "modules/drain_stage": module,
    }
    return files, expect(
        ["completeness"],
        [finding("completeness", "error", "empty function body")],
        error_count=1,
    )


def design_stub_body() -> tuple[dict, dict]:
    module = clean_module("gate_stage")
    module["code"] += """
int ready_flag() {
    return 0;
}
"""
    files = {
        "system_design.json": graph(
            mod("gate_stage", [], ["input ap_uint<8> sample", "output ap_uint<8> out"])
        ),
        "modules/gate_stage": module,
    }
    return files, expect(
        ["completeness"],
        [finding("completeness", "error", "stub function body")],
        error_count=1,
    )


def design_missing_tb_main() -> tuple[dict, dict]:
    module = clean_module("probe_stage")
    module["testbench"] = """#include "probe_stage.h"
#include <cstdio>

void exercise_once() {
    ap_uint<8> out = 0;
    probe_stage(ap_uint<8>(7), out);
    std::printf("probe output %u\\n", (unsigned)out);
}
"""
    files = {
        "system_design.json": graph(
            mod("probe_stage", [], ["input ap_uint<8> sample", "output ap_uint<8> out"])
        ),
        "modules/probe_stage": module,
    }
    return files, expect(
        ["completeness"],
        [finding("completeness", "error", "testbench lacks an int-returning main")],
        error_count=1,
    )


def design_empty_testbench() -> tuple[dict, dict]:
    module = clean_module("tone_gen")
    module["testbench"] = ""
    files = {
        "system_design.json": graph(
            mod("tone_gen", [], ["input ap_uint<8> sample", "output ap_uint<8> out"])
        ),
        "modules/tone_gen": module,
    }
    return files, expect(
        ["completeness"],
        [finding("completeness", "error", "testbench file is empty")],
        error_count=1,
    )


def design_superfluous_directive() -> tuple[dict, dict]:
    body = """#pragma HLS ARRAY_PARTITION variable=coeff complete dim=1
    out = (ap_uint<8>)(sample + 3);
"""
    files = {
        "system_design.json": graph(
            mod("fir_stage", [], ["input ap_uint<8> sample", "output ap_uint<8> out"])
        ),
        "modules/fir_stage": clean_module("fir_stage", body),
    }
    return files, expect(
        [],
        [
            finding(
                "optimization",
                "warning",
                "superfluous directive: ARRAY_PARTITION names variable 'coeff'",
            )
        ],
        error_count=0,
        total_findings=1,
    )


def design_undeclared_stream_pragma() -> tuple[dict, dict]:
    body = """#pragma HLS STREAM variable=fifo depth=4
    out = (ap_uint<8>)(sample ^ 0x5a);
"""
    files = {
        "system_design.json": graph(
            mod("relay_stage", [], ["input ap_uint<8> sample", "output ap_uint<8> out"])
        ),
        "modules/relay_stage": clean_module("relay_stage", body),
    }
    return files, expect(
        [],
        [
            finding(
                "optimization",
                "warning",
                "superfluous directive: STREAM names variable 'fifo'",
            )
        ],
        error_count=0,
        total_findings=1,
    )


def design_duplicate_definition() -> tuple[dict, dict]:
    helper = """
static int clamp_sum(int a, int b) {
    int total = a + b;
    if (total > 255) {
        total = 255;
    }
    return total;
}
"""
    alpha = clean_module("alpha_unit")
    alpha["code"] += helper
    beta = clean_module("beta_unit")
    beta["code"] += helper
    files = {
        "system_design.json": graph(
            mod("alpha_unit", ["beta_unit"], ["output ap_uint<8> link"]),
            mod("beta_unit", ["alpha_unit"], ["input ap_uint<8> link"]),
        ),
        "modules/alpha_unit": alpha,
        "modules/beta_unit": beta,
    }
    return files, expect(
        ["syntax"],
        [finding("syntax", "error", "duplicate definition of 'clamp_sum()'")],
        error_count=1,
    )


def design_unbalanced_braces() -> tuple[dict, dict]:
    module = clean_module("mixer_core")
    module["code"] = """#include "mixer_core.h"

void mixer_core(ap_uint<8> sample, ap_uint<8> &out) {
#pragma HLS PIPELINE II=1
    if (sample > 16) {
        out = (ap_uint<8>)(sample - 16);
"""
    files = {
        "system_design.json": graph(
            mod("mixer_core", [], ["input ap_uint<8> sample", "output ap_uint<8> out"])
        ),
        "modules/mixer_core": module,
    }
    return files, expect(
        ["syntax"],
        [finding("syntax", "error", "unbalanced braces")],
        error_count=1,
    )


def design_missing_own_include() -> tuple[dict, dict]:
    module = clean_module("scaler_unit")
    module["code"] = """#include "ap_int.h"

void scaler_unit(ap_uint<8> sample, ap_uint<8> &out) {
#pragma HLS PIPELINE II=1
    out = (ap_uint<8>)(sample << 1);
}
"""
    files = {
        "system_design.json": graph(
            mod("scaler_unit", [], ["input ap_uint<8> sample", "output ap_uint<8> out"])
        ),
        "modules/scaler_unit": module,
    }
    return files, expect(
        ["syntax"],
        [finding("syntax", "error", "does not include its own header")],
        error_count=1,
    )


def design_dangling_connection() -> tuple[dict, dict]:
    files = {
        "system_design.json": graph(
            mod("mixer", ["ghost_unit"], ["input ap_uint<8> sample"])
        ),
        "modules/mixer": clean_module("mixer"),
    }
    return files, expect(
        ["interface", "system_design"],
        [
            finding("interface", "error", "connects to unknown module 'ghost_unit'"),
            finding("system_design", "error", "dangling-connection"),
        ],
        error_count=2,
    )


def design_missing_artifact() -> tuple[dict, dict]:
    files = {
        "system_design.json": graph(
            mod("mixer", ["tone_src"], ["input ap_uint<8> blend"]),
            mod("tone_src", ["mixer"], ["output ap_uint<8> tone"]),
        ),
        "modules/tone_src": clean_module("tone_src"),
    }
    return files, expect(
        ["completeness"],
        [finding("completeness", "error", "module 'mixer' is declared in the plan")],
        error_count=1,
    )


DESIGNS = {
    "clean_single": design_clean_single,
    "clean_wired": design_clean_wired,
    "width_mismatch": design_width_mismatch,
    "type_mismatch": design_type_mismatch,
    "placeholder": design_placeholder,
    "empty_body": design_empty_body,
    "stub_body": design_stub_body,
    "missing_tb_main": design_missing_tb_main,
    "empty_testbench": design_empty_testbench,
    "superfluous_directive": design_superfluous_directive,
    "undeclared_stream_pragma": design_undeclared_stream_pragma,
    "duplicate_definition": design_duplicate_definition,
    "unbalanced_braces": design_unbalanced_braces,
    "missing_own_include": design_missing_own_include,
    "dangling_connection": design_dangling_connection,
    "missing_artifact": design_missing_artifact,
}


def materialize(name: str, files: dict, expected: dict) -> None:
    root = CORPUS / name
    for rel, content in files.items():
        if rel == "system_design.json":
            (root / rel).parent.mkdir(parents=True, exist_ok=True)
            (root / rel).write_text(json.dumps(content, indent=2) + "\n", "utf-8")
            continue
        module_dir = root / rel
        module_dir.mkdir(parents=True, exist_ok=True)
        stem = Path(rel).name
        if stem == "top":
            # The checker names the top artifact from its cpp stem.
            stem = content["code"].split('"')[1].removesuffix(".h")
        (module_dir / f"{stem}.cpp").write_text(content["code"], "utf-8")
        (module_dir / f"{stem}.h").write_text(content["header"], "utf-8")
        (module_dir / f"{stem}_tb.cpp").write_text(content["testbench"], "utf-8")
    (root / "expected.json").write_text(json.dumps(expected, indent=2) + "\n", "utf-8")


def main() -> None:
    if CORPUS.exists():
        shutil.rmtree(CORPUS)
    for name, build in DESIGNS.items():
        files, expected = build()
        materialize(name, files, expected)
    print(f"corpus rebuilt: {len(DESIGNS)} designs under {CORPUS}")


if __name__ == "__main__":
    main()
