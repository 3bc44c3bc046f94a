"""Expertise-adaptive ReAct debugging agent over the simulated robot.

The agent consumes diagnosis events and user chat, runs a
reason/act/observe loop over a small tool registry, and shapes every
reply to the user's self-reported expertise level. All structured
report fields come from tool evidence or the originating event, never
from free text, so downstream scoring does not depend on narrative
parsing. The loop is backend-agnostic: the scripted mock makes whole
sessions byte-reproducible, a remote provider can slot in unchanged.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import code_review as review
from . import kernels
from .backends import BackendAction, BackendError, ScriptedBackend
from .bus import Image, LaserScan, LogEntry, MessageBus, ROSOUT, payload_digest
from .diagnostics import DiagnosisEvent, DiagnosticsEngine
from .kb import KnowledgeBase, tokenize

LEVELS = ("beginner", "intermediate", "expert")

# Plain-language expansions inserted for beginners. Each reads
# "(a <term> is ...)" so shaped output is mechanically checkable.
GLOSSARY = {
    "node": "a node is a small program doing one job on the robot",
    "topic": "a topic is a named channel carrying data between programs",
    "publisher": "a publisher is a program that sends data on a topic",
    "subscriber": "a subscriber is a program that listens to a topic",
    "message": "a message is one packet of data sent on a topic",
    "service": "a service is a request/reply call between programs",
}

DEFINITION_PATTERN = re.compile(r"\(an? [a-z_/]+ is [^)]+\)")
INTERFACE_HEADERS = ("Publishers:", "Subscribers:", "Services:")

_TECH_TERMS = frozenset({
    "qos", "dds", "middleware", "callback", "latency", "hz", "topic", "node",
    "publisher", "subscriber", "remap", "parameter", "stamp", "seq", "launch",
})


def normalize_node(name: str) -> str:
    return name.strip().lstrip("/")


def normalize_topic(name: str) -> str:
    name = name.strip()
    return name if name.startswith("/") else "/" + name


def count_definition_markers(text: str) -> int:
    return len(DEFINITION_PATTERN.findall(text))


def has_interface_section(text: str) -> bool:
    return any(h in text for h in INTERFACE_HEADERS)


@dataclass
class ExpertiseProfile:
    level: str
    implicit_enabled: bool = False
    history: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.level not in LEVELS:
            raise ValueError(f"level must be one of {LEVELS}, got {self.level!r}")

    def observe_user_message(self, text: str) -> None:
        self.history.append(text)
        del self.history[:-10]

    def effective_level(self) -> str:
        """Self-reported level, nudged at most one step by term density."""
        base = LEVELS.index(self.level)
        if not self.implicit_enabled or len(self.history) < 3:
            return self.level
        hits = sum(len(tokenize(m) & _TECH_TERMS) for m in self.history)
        density = hits / len(self.history)
        shift = 1 if density >= 1.0 else (-1 if density == 0.0 else 0)
        return LEVELS[min(2, max(0, base + shift))]


@dataclass
class ResponseDraft:
    """Structured content; shaping turns it into level-appropriate text."""
    summary: str
    body: list = field(default_factory=list)
    interfaces: Optional[dict] = None
    terms: list = field(default_factory=list)


def shape_response(draft: ResponseDraft, profile: ExpertiseProfile) -> str:
    """Deterministic per-level rendering of a structured draft."""
    level = profile.effective_level()
    if level == "beginner":
        lines = [draft.summary]
        for term in draft.terms:
            if term in GLOSSARY:
                lines.append(f"({GLOSSARY[term]})")
        lines.extend(draft.body)
        return "\n".join(lines)
    if level == "intermediate":
        lines = [draft.summary]
        lines.extend(draft.body)
        if draft.interfaces is not None:
            for header, key in (("Publishers:", "publishers"),
                                ("Subscribers:", "subscribers"),
                                ("Services:", "services")):
                entries = draft.interfaces.get(key, [])
                lines.append(header)
                lines.extend(f"  - {e}" for e in entries)
                if not entries:
                    lines.append("  - none")
        return "\n".join(lines)
    # expert: compact phrasing, interface lists inline
    lines = [draft.summary]
    if draft.interfaces is not None:
        pub = ", ".join(draft.interfaces.get("publishers", [])) or "-"
        sub = ", ".join(draft.interfaces.get("subscribers", [])) or "-"
        srv = ", ".join(draft.interfaces.get("services", [])) or "-"
        lines.append(f"Publishers: {pub} | Subscribers: {sub} | Services: {srv}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# tools


class ToolError(Exception):
    pass


class ToolRegistry:
    """Deterministic textual tools over the bus, KB, and code scanner."""

    NAMES = ("list_nodes", "node_info", "topic_echo", "topic_hz", "kb_lookup",
             "code_review", "restart_node", "read_log_tail")

    def __init__(self, bus: MessageBus, kb: Optional[KnowledgeBase] = None,
                 workspace_root: Optional[str] = None):
        self.bus = bus
        self.kb = kb
        self.workspace_root = workspace_root
        self.context_event: Optional[DiagnosisEvent] = None
        self.last_review: list = []

    def invoke(self, name: str, args: dict) -> str:
        if name not in self.NAMES:
            raise ToolError(f"unknown-tool: {name!r} (available: {', '.join(self.NAMES)})")
        return getattr(self, f"_tool_{name}")(args or {})

    # -- helpers --------------------------------------------------------

    def _resolve_node(self, raw: str):
        want = normalize_node(raw)
        for rec in self.bus.nodes():
            if normalize_node(rec.name) == want:
                return rec
        raise ToolError(f"unknown node {raw!r}")

    def _resolve_topic(self, raw: str) -> str:
        return normalize_topic(raw)

    @staticmethod
    def _render_payload(payload) -> str:
        if isinstance(payload, LogEntry):
            return f"[{payload.level}] {payload.node}: {payload.text}"
        if isinstance(payload, LaserScan):
            r = payload.ranges
            distinct = int(np.unique(r).size)
            text = (f"LaserScan n={r.size} min={float(r.min()):.3f} "
                    f"max={float(r.max()):.3f} distinct={distinct}")
            if distinct == 1:
                text += f" all {r.size} values identical: {float(r[0]):.3f}"
            return text
        if isinstance(payload, Image):
            var = kernels.pixel_variance(payload.pixels)
            text = f"Image {payload.width}x{payload.height}x{payload.channels} variance={var:.1f}"
            if var < 1.0:
                text += f" blank (all pixels {int(payload.pixels.reshape(-1)[0])})"
            return text
        return repr(payload)

    # -- tools ------------------------------------------------------------

    def _tool_list_nodes(self, args: dict) -> str:
        parts = [f"{rec.name}({'alive' if rec.alive else 'dead'})"
                 for rec in self.bus.nodes()]
        return "nodes: " + ", ".join(parts)

    def _tool_node_info(self, args: dict) -> str:
        rec = self._resolve_node(args.get("node", ""))
        status = "alive" if rec.alive else "dead (process not running)"
        pubs = ", ".join(sorted(rec.publishes)) or "-"
        subs = ", ".join(sorted(rec.subscribes)) or "-"
        return f"node {rec.name}: {status}; publishes: {pubs}; subscribes: {subs}"

    def _tool_topic_echo(self, args: dict) -> str:
        topic = self._resolve_topic(args.get("topic", ""))
        n = int(args.get("n", 1))
        now = self.bus.clock
        pubs = [p for p in self.bus.publications if p.message.topic == topic][-n:]
        if not pubs:
            return f"no messages on {topic}"
        lines = [f"now={now} last {len(pubs)} message(s) on {topic}"]
        for p in pubs:
            m = p.message
            lines.append(f"t={p.t} seq={m.seq} publisher={m.publisher} "
                         f"stamp={m.stamp} age_ms={now - m.stamp} "
                         f"{self._render_payload(m.payload)}")
        return "\n".join(lines)

    def _tool_topic_hz(self, args: dict) -> str:
        topic = self._resolve_topic(args.get("topic", ""))
        window = int(args.get("window_ms", 5000))
        now = self.bus.clock
        effective = min(window, now)
        if effective <= 0:
            return f"0.0 Hz on {topic} (no time elapsed)"
        count = sum(1 for p in self.bus.publications
                    if p.message.topic == topic and now - effective < p.t <= now)
        rate = count * 1000.0 / effective
        return f"≈{rate:.1f} Hz on {topic} over last {effective} ms ({count} msgs)"

    def _tool_kb_lookup(self, args: dict) -> str:
        if self.kb is None:
            raise ToolError("knowledge base not attached")
        query = args.get("query", "")
        results = self.kb.retrieve(query, k=int(args.get("k", 3)))
        if not results:
            return "no prior records match the query"
        lines = []
        for rank, res in enumerate(results, start=1):
            record = self.kb.get(res.record_id)
            lines.append(f"{rank}. {record.id} sim={res.similarity:.3f} :: "
                         f"{record.signature} | fix: {'; '.join(record.resolution_steps)}")
        return "\n".join(lines)

    def _tool_code_review(self, args: dict) -> str:
        if self.workspace_root is None:
            raise ToolError("no workspace root configured for code review")
        path = args.get("path", "")
        if not path:
            raise ToolError("code_review requires a path")
        try:
            summary = review.summarize_path(path, self.workspace_root)
        except PermissionError as exc:
            raise ToolError(str(exc)) from exc
        if summary.flagged and not summary.lines:
            raise ToolError(f"unreadable source at {path!r}")
        findings = review.match_findings(summary, self.context_event)
        self.last_review = [f.to_dict() for f in findings]
        counts: dict = {}
        for f in findings:
            counts[f.kind] = counts.get(f.kind, 0) + 1
        head = (f"reviewed {path}: {len(summary.functions)} functions, "
                f"{len(summary.config_params)} config params, {len(findings)} findings")
        if counts:
            head += " (" + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())) + ")"
        lines = [head]
        lines.extend(f"{f.kind}@{f.line}: {f.excerpt.strip()}" for f in findings[:8])
        return "\n".join(lines)

    def _tool_restart_node(self, args: dict) -> str:
        rec = self._resolve_node(args.get("node", ""))
        receipt = self.bus.restart_node(rec.name)
        if receipt.warning == "already alive":
            return f"node {rec.name} was already alive"
        return f"restarted node {rec.name}"

    def _tool_read_log_tail(self, args: dict) -> str:
        n = int(args.get("n", 5))
        rows = [p for p in self.bus.publications if p.message.topic == ROSOUT][-n:]
        if not rows:
            return "log is empty"
        return "\n".join(
            f"[t={p.t}] {self._render_payload(p.message.payload)}" for p in rows)


# ---------------------------------------------------------------------------
# session records


@dataclass
class AgentStep:
    thought: str
    tool: str
    args: dict
    observation: str


@dataclass
class DebugReport:
    narrative: str
    identified_node: Optional[str]
    identified_topic: Optional[str]
    identified_error_type: Optional[str]
    hypotheses: list
    diagnostics_run: list
    recommendations: list
    root_cause: Optional[str]
    complete: bool
    code_findings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"narrative": self.narrative, "identified_node": self.identified_node,
                "identified_topic": self.identified_topic,
                "identified_error_type": self.identified_error_type,
                "hypotheses": self.hypotheses, "diagnostics_run": self.diagnostics_run,
                "recommendations": self.recommendations, "root_cause": self.root_cause,
                "complete": self.complete, "code_findings": self.code_findings}

    @classmethod
    def from_dict(cls, doc: dict) -> "DebugReport":
        return cls(**doc)


@dataclass
class Notification:
    event_id: str
    text: str
    fix_token: str
    actions: tuple = ("explore", "fix", "ignore")


@dataclass
class Session:
    id: str
    profile: ExpertiseProfile
    transcript: list = field(default_factory=list)
    open_events: list = field(default_factory=list)
    events: dict = field(default_factory=dict)
    notifications: dict = field(default_factory=dict)
    reports: list = field(default_factory=list)
    status: str = "active"

    def transcript_json(self) -> str:
        import json
        return json.dumps({"id": self.id, "level": self.profile.level,
                           "status": self.status, "transcript": self.transcript},
                          indent=2)


class AgentError(Exception):
    pass


_PURPOSE_RE = re.compile(r"(?:purpose|role) of (?:the )?([A-Za-z0-9_/]+)(?: node)?", re.I)
_NODE_Q_RE = re.compile(r"(?:about|what is) (?:the )?([A-Za-z0-9_/]+) node", re.I)
_PROBE_RE = re.compile(r"(?:error|anomaly) in (?:the )?(image|lidar|camera)", re.I)


def _evidence_identification(steps: list, variables: dict
                             ) -> tuple[Optional[str], Optional[str], Optional[str]]:
    """Derive (topic, node, error type) from tool observations alone."""
    topic = node = etype = None
    for step in steps:
        obs = step.observation
        step_topic = step.args.get("topic") if step.tool in ("topic_echo", "topic_hz") else None
        if step.tool == "topic_echo" and ("identical:" in obs or "blank (" in obs):
            etype = "corrupt"
            topic = step_topic or topic
            pub = re.search(r"publisher=(\S+)", obs)
            node = pub.group(1) if pub else node
            break
    if etype is None:
        for step in steps:
            if step.tool == "node_info" and "dead (process not running)" in step.observation:
                etype = "node_crash"
                node = normalize_node(step.args.get("node", "")) or node
                break
            if step.tool == "read_log_tail" and "process died: " in step.observation:
                etype = "node_crash"
                m = re.search(r"process died: (\S+)", step.observation)
                node = m.group(1) if m else node
                break
    if etype is None:
        for step in steps:
            if step.tool == "topic_hz" and re.search(r"[^\d]0\.0 Hz", "x" + step.observation):
                etype = "drop"
                topic = step.args.get("topic") or topic
                break
    if etype is None:
        nominal = variables.get("nominal_period")
        if nominal:
            # Delay means stale stamps on a stream that is still arriving;
            # old messages on a stopped stream are a drop/crash symptom.
            for step in steps:
                if step.tool != "topic_echo":
                    continue
                now_m = re.search(r"now=(\d+)", step.observation)
                ts = [int(t) for t in re.findall(r"t=(\d+)", step.observation)]
                ages = [int(a) for a in re.findall(r"age_ms=(\d+)", step.observation)]
                if not (now_m and ts and ages):
                    continue
                arriving = int(now_m.group(1)) - max(ts) <= 3 * float(nominal)
                if arriving and max(ages) > 3 * float(nominal):
                    etype = "delay"
                    topic = step.args.get("topic") or topic
                    break
    if topic is not None:
        topic = normalize_topic(topic)
    return topic, node, etype


class DebugAgent:
    """Owns sessions and runs the reason/act/observe loop."""

    def __init__(self, bus: MessageBus, kb: Optional[KnowledgeBase] = None,
                 engine: Optional[DiagnosticsEngine] = None,
                 backend=None, workspace_root: Optional[str] = None,
                 max_steps: int = 12, context_vars: Optional[dict] = None,
                 implicit_adjust: bool = False):
        self.bus = bus
        self.kb = kb
        self.engine = engine
        self.backend = backend
        self.max_steps = max_steps
        self.context_vars = dict(context_vars or {})
        self.implicit_adjust = implicit_adjust
        self.tools = ToolRegistry(bus, kb=kb, workspace_root=workspace_root)
        self._session_counter = 0
        self.sessions: dict[str, Session] = {}

    # -- sessions ---------------------------------------------------------

    def start_session(self, level: str) -> Session:
        profile = ExpertiseProfile(level=level, implicit_enabled=self.implicit_adjust)
        self._session_counter += 1
        session = Session(id=f"sess-{self._session_counter}", profile=profile)
        greeting = shape_response(ResponseDraft(
            summary=f"Debugging session started ({level} mode).",
            body=["I watch the robot's data streams and logs and will raise a "
                  "notification when something looks wrong.",
                  "Ask about any node or topic, or wait for a notification."],
            terms=["node", "topic"]), profile)
        session.transcript.append({"role": "agent", "text": greeting})
        self.sessions[session.id] = session
        return session

    def notify(self, session: Session, event: DiagnosisEvent) -> Notification:
        if session.status != "active":
            raise AgentError(f"session {session.id} is {session.status}")
        if event.id in session.notifications:
            return session.notifications[event.id]
        note = Notification(event_id=event.id,
                            text=self._notification_text(event, session.profile),
                            fix_token=f"fix:{event.id}")
        session.notifications[event.id] = note
        session.open_events.append(event.id)
        session.events[event.id] = event
        session.transcript.append({"role": "system", "text": note.text,
                                   "event_id": event.id})
        return note

    def _sensor_kind(self, event: DiagnosisEvent) -> str:
        if self.engine is not None:
            state = self.engine.health.get(event.topic)
            if state and state.source:
                try:
                    kind = self.bus.node(state.source).meta.get("kind")
                    if kind:
                        return kind
                except Exception:
                    pass
        return "sensor"

    def _notification_text(self, event: DiagnosisEvent, profile: ExpertiseProfile) -> str:
        kind = self._sensor_kind(event)
        ev = event.evidence
        plain = {
            "drop": f"the {kind} stopped sending data on {event.topic}",
            "delay": f"data from the {kind} is arriving late on {event.topic}",
            "corrupt": f"the {kind} data on {event.topic} looks wrong "
                       f"(the same value keeps repeating)",
            "node_crash": f"the program {event.suspected_node} stopped running",
            "log_error": f"an error was reported in the robot's logs",
        }[event.category]
        tech = {
            "drop": f"drop detected on {event.topic} "
                    f"(gap {ev.get('gap_ms', '?')} ms > threshold {ev.get('threshold_ms', '?')} ms)",
            "delay": f"delay detected on {event.topic} "
                     f"(staleness {ev.get('staleness_ms', '?')} ms over "
                     f"{ev.get('sustained', '?')} msgs)",
            "corrupt": f"corruption detected on {event.topic} "
                       f"({ev.get('verdict', '?')}, fraction {ev.get('fraction', '?')})",
            "node_crash": f"node {event.suspected_node} crashed "
                          f"({ev.get('log_excerpt', 'silence with dead source')})",
            "log_error": f"log error: {ev.get('log_excerpt', '')}",
        }[event.category]
        level = profile.effective_level()
        if level == "beginner":
            draft = ResponseDraft(summary=f"Heads up: {plain}.",
                                  body=["Press Fix to attempt an automatic repair, "
                                        "or Explore to look into it together."],
                                  terms=["topic"] if event.topic else [])
        elif level == "intermediate":
            draft = ResponseDraft(summary=f"Issue detected: {plain}.", body=[tech])
        else:
            draft = ResponseDraft(summary=tech)
        return shape_response(draft, profile)

    # -- chat -------------------------------------------------------------

    def chat(self, session: Session, text: str) -> str:
        if session.status != "active":
            raise AgentError(f"session {session.id} is {session.status}")
        if not text.strip():
            raise AgentError("empty message")
        session.transcript.append({"role": "user", "text": text})
        session.profile.observe_user_message(text)
        reply = self._route(session, text)
        session.transcript.append({"role": "agent", "text": reply})
        return reply

    def _route(self, session: Session, text: str) -> str:
        m = _PURPOSE_RE.search(text) or _NODE_Q_RE.search(text)
        if m:
            return self._describe_node(m.group(1), session.profile)
        if _PROBE_RE.search(text) and self.backend is not None:
            report = self.run_react(session, goal=text)
            return report.narrative
        if re.search(r"\b(fix|debug|investigate)\b", text, re.I) and session.open_events:
            event = session.events[session.open_events[-1]]
            report = self.run_react(
                session, goal=f"diagnose {event.category} on {event.topic} "
                              f"from node {event.suspected_node}", event=event)
            return report.narrative
        return self._status_summary(session.profile)

    def _describe_node(self, raw_name: str, profile: ExpertiseProfile) -> str:
        try:
            rec = self.tools._resolve_node(raw_name)
        except ToolError:
            return shape_response(ResponseDraft(
                summary=f"I don't know a node called {raw_name!r}.",
                body=["Use list_nodes to see what is running."],
                terms=["node"]), profile)
        role = rec.meta.get("role", "")
        kind = rec.meta.get("kind", "")
        if role == "fault_injector":
            purpose = (f"{rec.name} intercepts messages on {rec.meta['input_topic']} and "
                       f"republishes them to {rec.meta['output_topic']}, applying its "
                       f"configured fault action to each one")
            body = ["It sits between the sensor and its consumers, so it can corrupt, "
                    "hold back, or discard individual readings for testing."]
        elif kind:
            period = rec.meta.get("period_ms", 0)
            rate = f"{1000 / period:.0f} Hz" if period else "a fixed rate"
            purpose = (f"{rec.name} publishes synthetic {kind} frames on "
                       f"{rec.meta.get('topic', '?')} at {rate}")
            body = ["It stands in for a real sensor driver."]
        elif role == "monitor":
            purpose = f"{rec.name} watches data streams and reports anomalies"
            body = []
        elif "stall_log_after" in rec.meta:
            purpose = (f"{rec.name} consumes {rec.meta.get('topic', '?')} and logs an "
                       f"error if the stream stalls")
            body = []
        else:
            purpose = f"{rec.name} is a node in the robot graph"
            body = []
        status = "alive" if rec.alive else "dead"
        draft = ResponseDraft(
            summary=f"{purpose} (currently {status}).",
            body=body,
            interfaces={"publishers": sorted(rec.publishes),
                        "subscribers": sorted(rec.subscribes), "services": []},
            terms=["node", "topic"])
        return shape_response(draft, profile)

    def _status_summary(self, profile: ExpertiseProfile) -> str:
        alive = sum(1 for r in self.bus.nodes() if r.alive)
        total = len(self.bus.nodes())
        open_count = len(self.engine.open_episodes) if self.engine else 0
        draft = ResponseDraft(
            summary=f"{alive}/{total} nodes alive, {open_count} open issue(s).",
            body=["Ask about a specific node, or say 'debug' to investigate "
                  "the latest issue."],
            terms=["node"])
        return shape_response(draft, profile)

    # -- the reason/act/observe loop ---------------------------------------

    def run_react(self, session: Session, goal: str, backend=None,
                  event: Optional[DiagnosisEvent] = None,
                  max_steps: Optional[int] = None,
                  extra_vars: Optional[dict] = None,
                  rag_first: bool = True) -> DebugReport:
        if session.status != "active":
            raise AgentError(f"session {session.id} is {session.status}; "
                             f"no tool actions accepted")
        backend = backend or self.backend
        if backend is None:
            raise AgentError("no backend configured")
        if hasattr(backend, "reset"):
            backend.reset()
        max_steps = max_steps or self.max_steps
        if max_steps < 1:
            raise AgentError("max_steps must be >= 1")

        variables = dict(self.context_vars)
        if extra_vars:
            variables.update(extra_vars)
        if event is not None:
            variables.setdefault("topic", event.topic)
            variables.setdefault("node", event.suspected_node)
            variables.setdefault("category", event.category)
        self.tools.context_event = event
        self.tools.last_review = []

        steps: list[AgentStep] = []
        last_obs = ""
        # RAG-first: when the store already holds a plausibly relevant
        # record, surface it before the backend plans anything.
        if rag_first and self.kb is not None and self.kb.keyword_filter(tokenize(goal)):
            obs = self.tools.invoke("kb_lookup", {"query": goal})
            steps.append(AgentStep("checking the knowledge base for prior fixes",
                                   "kb_lookup", {"query": goal}, obs))
            last_obs = obs

        complete = False
        final: dict = {}
        backend_failure = None
        while len(steps) < max_steps:
            try:
                action: BackendAction = backend.propose(goal, last_obs, variables)
            except BackendError as exc:
                backend_failure = str(exc)
                break
            if action.kind == "final":
                complete = True
                final = action.final or {}
                break
            try:
                obs = self.tools.invoke(action.tool, action.args)
            except ToolError as exc:
                obs = f"error: {exc}"
            step = AgentStep(action.thought, action.tool, action.args, obs)
            steps.append(step)
            last_obs = obs
            if hasattr(backend, "record"):
                backend.record({"thought": step.thought, "tool": step.tool,
                                "args": step.args, "observation": step.observation})

        report = self._build_report(session, goal, event, steps, final, complete,
                                    backend_failure, variables)
        session.reports.append(report)
        return report

    def _build_report(self, session: Session, goal: str,
                      event: Optional[DiagnosisEvent], steps: list, final: dict,
                      complete: bool, backend_failure: Optional[str],
                      variables: dict) -> DebugReport:
        if event is not None:
            topic: Optional[str] = event.topic or None
            node: Optional[str] = event.suspected_node or None
            etype: Optional[str] = event.category
        else:
            topic, node, etype = _evidence_identification(steps, variables)

        hypotheses = list(final.get("hypotheses", []))
        recommendations = list(final.get("recommendations", []))
        root_cause = final.get("root_cause") or None
        diagnostics_run = [{"tool": s.tool, "args": s.args, "summary": s.observation}
                           for s in steps]
        code_findings = list(self.tools.last_review)

        if etype:
            summary = (f"Identified a {etype} issue on {topic or 'the robot'}"
                       + (f" originating at node {node}." if node else "."))
        else:
            summary = "No anomaly identified for this query."
        if not complete:
            why = backend_failure or "step budget exhausted"
            summary += f" (report incomplete: {why})"
        body = [f"Hypothesis: {h}" for h in hypotheses]
        body += [f"Recommended: {r}" for r in recommendations]
        if root_cause:
            body.append(f"Root cause: {root_cause}")
        narrative = shape_response(
            ResponseDraft(summary=summary, body=body, terms=["node", "topic"]),
            session.profile)
        return DebugReport(narrative=narrative, identified_node=node,
                           identified_topic=topic, identified_error_type=etype,
                           hypotheses=hypotheses, diagnostics_run=diagnostics_run,
                           recommendations=recommendations, root_cause=root_cause,
                           complete=complete, code_findings=code_findings)

    # -- resolution ---------------------------------------------------------

    def resolve_and_record(self, session: Session, outcome: str):
        if session.status == "resolved":
            raise AgentError(f"session {session.id} already resolved")
        if not session.open_events:
            raise AgentError("no-open-event: nothing to resolve in this session")
        if self.kb is None:
            raise AgentError("no knowledge base attached")
        event = session.events[session.open_events[-1]]
        signature = f"{event.category} on {event.topic or event.suspected_node}: " \
                    f"{event.evidence.get('log_excerpt', event.evidence.get('verdict', 'detected by monitors'))}"
        steps = [outcome]
        if session.reports and session.reports[-1].recommendations:
            steps.extend(session.reports[-1].recommendations)
        record = self.kb.add_record(signature=signature,
                                    description=outcome,
                                    resolution_steps=steps)
        if self.engine is not None:
            for eid in session.open_events:
                ev = session.events[eid]
                self.engine.close_episodes(topic=ev.topic, category=ev.category)
        session.open_events.clear()
        session.status = "resolved"
        session.transcript.append({"role": "system",
                                   "text": f"session resolved: {outcome}"})
        return record
