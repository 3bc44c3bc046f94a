"""Lexical source scanning and diagnosis-aware findings."""

from __future__ import annotations

from pathlib import Path

import pytest

from robotriage.code_review import (MARKER_LEXICON, match_findings,
                                    summarize_path, summarize_source)
from robotriage.diagnostics import DiagnosisEvent

REPO_ROOT = Path(__file__).resolve().parents[1]

PY_SOURCE = '''\
import math

error_frequency = 0.3
state = build_state()


def apply_fault(msg):
    return msg
'''

CLEAN_CONSUMER = '''\
def on_message(msg):
    update_display(msg)


def main():
    subscribe("/scan_out", on_message)
'''

C_SOURCE = '''\
#include <stdio.h>
#define MAX_RANGES 360

int scan_count = 0;

int process_scan(float *ranges, int n) {
    return n;
}
'''


def _event(category="corrupt", topic="/scan_out"):
    return DiagnosisEvent(id="evt-1", time=100, topic=topic, suspected_node="lidar_src",
                          category=category, evidence={"verdict": "repeated_values"},
                          confidence=0.9)


class TestSummarize:
    def test_python_function_and_config_param(self):
        summary = summarize_source(PY_SOURCE, "python")
        assert [name for name, _ in summary.functions] == ["apply_fault"]
        assert ("error_frequency", "0.3", 3) in summary.config_params
        assert ("state", 4) in summary.variables
        assert summary.imports

    def test_empty_file_flagged(self):
        summary = summarize_source("")
        assert summary.flagged is True
        assert summary.functions == [] and summary.config_params == []

    def test_sample_fault_yaml_yields_the_eight_schema_keys(self):
        summary = summarize_path("configs/sample_fault.yaml", str(REPO_ROOT))
        keys = [k for k, _, _ in summary.config_params]
        assert keys == ["sensor_kind", "message_type", "input_topic", "output_topic",
                        "error_type", "error_value", "error_frequency", "seed"]

    def test_c_like_extraction(self):
        summary = summarize_source(C_SOURCE, "c")
        assert ("MAX_RANGES", "360", 2) in summary.config_params
        assert any(name == "process_scan" for name, _ in summary.functions)
        assert summary.imports

    def test_language_guess(self):
        assert summarize_source(PY_SOURCE).language == "python"
        assert summarize_source("key: value\nother: 3\n").language == "yaml"


class TestMatchFindings:
    def test_injector_source_yields_injection_markers(self):
        summary = summarize_source(PY_SOURCE, "python")
        findings = match_findings(summary, _event())
        markers = [f for f in findings if f.kind == "injection-marker"]
        assert markers  # apply_fault matches 'fault'
        assert any("apply_fault" in f.rationale for f in markers)

    def test_clean_consumer_has_no_injection_markers(self):
        summary = summarize_source(CLEAN_CONSUMER, "python")
        findings = match_findings(summary, _event(category="drop"))
        assert [f for f in findings if f.kind == "injection-marker"] == []

    def test_config_issue_points_at_matching_line(self):
        source = "input_topic: /scan\nerror_type: delay\nseed: 3\n"
        summary = summarize_source(source, "yaml")
        findings = match_findings(summary, _event(category="delay", topic="/scan_out"))
        config_issues = [f for f in findings if f.kind == "config-issue"]
        assert any(f.line == 2 and "error_type" in f.excerpt for f in config_issues)

    def test_unbalanced_bracket_flags_syntax_suspect(self):
        source = "def broken(:\n    x = (1 + 2\n"
        summary = summarize_source(source, "python")
        findings = match_findings(summary, None)
        assert any(f.kind == "syntax-suspect" for f in findings)

    def test_excerpt_fidelity(self):
        summary = summarize_source(PY_SOURCE, "python")
        findings = match_findings(summary, _event())
        lines = PY_SOURCE.splitlines()
        for f in findings:
            assert f.excerpt == lines[f.line - 1]

    def test_determinism(self):
        summary = summarize_source(PY_SOURCE, "python")
        a = [f.to_dict() for f in match_findings(summary, _event())]
        b = [f.to_dict() for f in match_findings(summary, _event())]
        assert a == b

    def test_marker_lexicon_contents(self):
        assert {"fault", "inject", "corrupt", "drop", "delay", "random"} <= \
            set(MARKER_LEXICON)


class TestWorkspaceConfinement:
    def test_path_traversal_rejected(self, tmp_path):
        (tmp_path / "inner").mkdir()
        (tmp_path / "secret.py").write_text("x = 1\n")
        with pytest.raises(PermissionError):
            summarize_path("../secret.py", str(tmp_path / "inner"))

    def test_missing_file_degrades_to_flagged_summary(self, tmp_path):
        summary = summarize_path("nope.py", str(tmp_path))
        assert summary.flagged is True
