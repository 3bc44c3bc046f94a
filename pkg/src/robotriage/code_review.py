"""Lexical source summarization and diagnosis-aware finding extraction.

A line-oriented regex scan (never execution) pulls functions, variables,
configuration parameters, and imports out of node scripts. Findings are
then matched against an active diagnosis: identifiers from the marker
lexicon flag deliberate fault-injection machinery, config keys that echo
the event's topic or category flag configuration issues, and unbalanced
brackets or quotes flag suspect syntax.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .diagnostics import DiagnosisEvent

_LITERAL_RE = re.compile(
    r"""^(['"].*['"]|-?\d+(\.\d+)?([eE][+-]?\d+)?|[Tt]rue|[Ff]alse|[Nn]one|null)$""")

_PY_FUNC = re.compile(r"^\s*(?:async\s+)?def\s+(\w+)\s*\(")
_PY_IMPORT = re.compile(r"^\s*(?:from\s+[\w.]+\s+)?import\s+[\w.,\s*]+")
_ASSIGN = re.compile(r"^\s*([A-Za-z_]\w*)\s*[:=]?=\s*(.+?)\s*(?:#.*)?$")
_C_INCLUDE = re.compile(r"^\s*#\s*include\b")
_C_DEFINE = re.compile(r"^\s*#\s*define\s+(\w+)\s+(.+?)\s*$")
_C_FUNC = re.compile(r"^\s*[\w:<>,*&\s]+?\b(\w+)\s*\([^;]*\)\s*\{?\s*$")
_YAML_KV = re.compile(r"^\s*-?\s*([A-Za-z0-9_.\-]+):\s*(\S.*?)\s*(?:#.*)?$")

_BRACKETS = {")": "(", "]": "[", "}": "{"}
_QUOTED = re.compile(r"(['\"]).*?\1")


def _load_lexicon() -> list:
    text = resources.files("robotriage.data").joinpath("marker_lexicon.txt").read_text()
    return [line.strip().lower() for line in text.splitlines()
            if line.strip() and not line.startswith("#")]


MARKER_LEXICON = _load_lexicon()


@dataclass
class CodeSummary:
    path: str = ""
    language: str = "generic"
    functions: list = field(default_factory=list)      # (name, line)
    variables: list = field(default_factory=list)      # (name, line)
    config_params: list = field(default_factory=list)  # (key, value, line)
    imports: list = field(default_factory=list)
    flagged: bool = False
    lines: tuple = ()

    def to_dict(self) -> dict:
        return {"path": self.path, "language": self.language,
                "functions": self.functions, "variables": self.variables,
                "config_params": self.config_params, "imports": self.imports,
                "flagged": self.flagged}


@dataclass
class Finding:
    kind: str  # syntax-suspect | config-issue | injection-marker | logic-flag
    line: int
    excerpt: str
    rationale: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "line": self.line,
                "excerpt": self.excerpt, "rationale": self.rationale}


def _guess_language(source: str) -> str:
    if re.search(r"^\s*(def |import |from \w+ import)", source, re.M):
        return "python"
    if re.search(r"^\s*#\s*include|;\s*$", source, re.M) and "{" in source:
        return "c"
    lines = [ln for ln in source.splitlines() if ln.strip() and not ln.strip().startswith("#")]
    if lines and sum(1 for ln in lines if _YAML_KV.match(ln)) >= max(1, len(lines) // 2):
        return "yaml"
    return "generic"


def summarize_source(source: str, language_hint: Optional[str] = None) -> CodeSummary:
    """Line-oriented lexical scan; unknown syntax degrades to value extraction."""
    lines = source.splitlines()
    language = language_hint or _guess_language(source)
    summary = CodeSummary(language=language, lines=tuple(lines))
    if not source.strip():
        summary.flagged = True
        return summary

    for i, raw in enumerate(lines, start=1):
        line = raw.rstrip()
        if not line.strip() or line.strip().startswith(("#", "//")):
            if language == "c" and _C_INCLUDE.match(line):
                summary.imports.append((line.strip(), i))
            elif language == "c":
                m = _C_DEFINE.match(line)
                if m:
                    summary.config_params.append((m.group(1), m.group(2), i))
            continue

        if language == "python":
            m = _PY_FUNC.match(line)
            if m:
                summary.functions.append((m.group(1), i))
                continue
            if _PY_IMPORT.match(line):
                summary.imports.append((line.strip(), i))
                continue
        elif language == "c":
            if _C_INCLUDE.match(line):
                summary.imports.append((line.strip(), i))
                continue
            m = _C_DEFINE.match(line)
            if m:
                summary.config_params.append((m.group(1), m.group(2), i))
                continue
            m = _C_FUNC.match(line)
            if m and not line.strip().startswith(("if", "for", "while", "switch", "return")):
                summary.functions.append((m.group(1), i))
                continue
        elif language == "yaml":
            m = _YAML_KV.match(line)
            if m:
                summary.config_params.append((m.group(1), m.group(2), i))
            continue

        m = _ASSIGN.match(line)
        if m:
            name, value = m.group(1), m.group(2).rstrip(";").strip()
            if _LITERAL_RE.match(value):
                summary.config_params.append((name, value, i))
            else:
                summary.variables.append((name, i))
            continue
        if language == "generic":
            m = _YAML_KV.match(line)
            if m and _LITERAL_RE.match(m.group(2)):
                summary.config_params.append((m.group(1), m.group(2), i))
    return summary


def summarize_path(path: str, workspace_root: str,
                   language_hint: Optional[str] = None) -> CodeSummary:
    """Summarize a file under the workspace root; traversal outside is rejected."""
    root = Path(workspace_root).resolve()
    target = (root / path).resolve()
    if not target.is_relative_to(root):
        raise PermissionError(f"path {path!r} escapes workspace root")
    hint = language_hint
    if hint is None:
        hint = {".py": "python", ".c": "c", ".cc": "c", ".cpp": "c", ".h": "c",
                ".hpp": "c", ".yaml": "yaml", ".yml": "yaml"}.get(target.suffix)
    try:
        source = target.read_text()
    except OSError:
        summary = CodeSummary(path=str(path), flagged=True)
        return summary
    summary = summarize_source(source, hint)
    summary.path = str(path)
    return summary


def _bracket_findings(lines: tuple) -> list:
    findings = []
    stack: list[tuple[str, int]] = []
    for i, raw in enumerate(lines, start=1):
        line = _QUOTED.sub("", raw)
        if line.count('"') % 2 == 1 or line.count("'") % 2 == 1:
            findings.append(Finding("syntax-suspect", i, raw, "unbalanced quote on line"))
            continue
        for ch in line:
            if ch in "([{":
                stack.append((ch, i))
            elif ch in ")]}":
                if stack and stack[-1][0] == _BRACKETS[ch]:
                    stack.pop()
                else:
                    findings.append(Finding("syntax-suspect", i, raw,
                                            f"unmatched closing {ch!r}"))
    for ch, i in stack:
        findings.append(Finding("syntax-suspect", i, lines[i - 1],
                                f"unclosed {ch!r} opened here"))
    return findings


def match_findings(summary: CodeSummary, event: Optional[DiagnosisEvent],
                   lexicon: Optional[list] = None) -> list:
    """Heuristic findings relevant to the active diagnosis."""
    lexicon = MARKER_LEXICON if lexicon is None else [m.lower() for m in lexicon]
    findings: list[Finding] = []

    def excerpt(line: int) -> str:
        return summary.lines[line - 1] if 0 < line <= len(summary.lines) else ""

    identifiers = [(name, line) for name, line in summary.functions + summary.variables]
    identifiers += [(key, line) for key, _, line in summary.config_params]
    for name, line in identifiers:
        low = name.lower()
        hits = [m for m in lexicon if m in low]
        if hits:
            findings.append(Finding("injection-marker", line, excerpt(line),
                                    f"identifier {name!r} matches marker(s) {hits}"))

    if event is not None:
        topic_token = event.topic.strip("/").replace("/", "_").lower()
        category = event.category.lower()
        for key, value, line in summary.config_params:
            blob = f"{key} {value}".lower()
            if (topic_token and topic_token in blob) or (category and category in blob):
                findings.append(Finding("config-issue", line, excerpt(line),
                                        f"config {key!r} matches diagnosed "
                                        f"{event.category} on {event.topic or 'n/a'}"))

    findings.extend(_bracket_findings(summary.lines))
    findings.sort(key=lambda f: (f.line, f.kind))
    return findings


def findings_document(summary: CodeSummary, findings: list) -> str:
    return json.dumps({"summary": summary.to_dict(),
                       "findings": [f.to_dict() for f in findings]}, indent=2)
