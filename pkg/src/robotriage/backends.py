"""Language-model backends for the debugging agent.

The agent only ever sees the ``propose`` interface, so its correctness
is independent of which backend sits behind it. ``ScriptedBackend`` is
a deterministic regex-keyed decision table (the mock used by tests and
the evaluation harness); ``RemoteBackend`` talks to a real completion
service over a small JSON protocol.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from string import Template
from typing import Optional

import yaml


class BackendError(Exception):
    pass


@dataclass
class BackendAction:
    kind: str  # "tool" | "final"
    thought: str = ""
    tool: str = ""
    args: dict = field(default_factory=dict)
    final: dict = field(default_factory=dict)


def _substitute(value, variables: dict):
    if isinstance(value, str):
        return Template(value).safe_substitute(variables)
    if isinstance(value, list):
        return [_substitute(v, variables) for v in value]
    if isinstance(value, dict):
        return {k: _substitute(v, variables) for k, v in value.items()}
    return value


class ScriptedBackend:
    """Regex-keyed decision table; each rule fires at most once per session.

    A rule matches against the goal text plus the latest observation.
    ``${var}`` placeholders in args and final fields are filled from the
    context variables handed to ``propose``.
    """

    def __init__(self, rules: list, name: str = "scripted-mock"):
        self.name = name
        self.rules = rules
        self._used = [False] * len(rules)

    @classmethod
    def from_yaml(cls, text: str) -> "ScriptedBackend":
        doc = yaml.safe_load(text) or {}
        rules = doc.get("rules", [])
        for i, rule in enumerate(rules):
            if "tool" not in rule and "final" not in rule:
                raise ValueError(f"rule {i}: needs either 'tool' or 'final'")
        return cls(rules, name=doc.get("name", "scripted-mock"))

    def reset(self) -> None:
        self._used = [False] * len(self.rules)

    def propose(self, goal: str, last_observation: str, variables: dict) -> BackendAction:
        context = f"{goal}\n{last_observation}"
        for i, rule in enumerate(self.rules):
            if self._used[i] and not rule.get("repeat", False):
                continue
            pattern = rule.get("match", "")
            if pattern and not re.search(pattern, context):
                continue
            self._used[i] = True
            thought = _substitute(rule.get("thought", ""), variables)
            if "tool" in rule:
                return BackendAction(kind="tool", thought=thought, tool=rule["tool"],
                                     args=_substitute(rule.get("args", {}), variables))
            return BackendAction(kind="final", thought=thought,
                                 final=_substitute(rule.get("final", {}), variables))
        return BackendAction(kind="final", thought="no applicable rule left",
                             final={})


class RemoteBackend:
    """Completion provider over HTTP.

    Request: {"goal", "steps": [{thought, tool, args, observation}],
    "variables", "tools"}; response: {"thought", "tool", "args"} or
    {"thought", "final": {...}}.
    """

    def __init__(self, url: str, timeout: float = 30.0, tool_names: Optional[list] = None):
        self.name = f"remote:{url}"
        self.url = url
        self.timeout = timeout
        self.tool_names = tool_names or []
        self._steps: list = []

    def reset(self) -> None:
        self._steps = []

    def record(self, step: dict) -> None:
        self._steps.append(step)

    def propose(self, goal: str, last_observation: str, variables: dict) -> BackendAction:
        import httpx
        payload = {"goal": goal, "steps": self._steps,
                   "variables": variables, "tools": self.tool_names}
        try:
            resp = httpx.post(self.url, json=payload, timeout=self.timeout)
            resp.raise_for_status()
            doc = resp.json()
        except Exception as exc:
            raise BackendError(f"backend at {self.url}: {exc}") from exc
        if "final" in doc:
            return BackendAction(kind="final", thought=doc.get("thought", ""),
                                 final=doc["final"] or {})
        if "tool" in doc:
            return BackendAction(kind="tool", thought=doc.get("thought", ""),
                                 tool=doc["tool"], args=doc.get("args", {}))
        raise BackendError("backend response carries neither 'tool' nor 'final'")
