"""HTTP + server-push boundary in front of the simulator and agent.

One service process owns one simulation: bus, injectors, detectors,
agent, and knowledge base all live together so every run stays
deterministic. Sessions are created over HTTP, chat turns and fix
actions are serialized per session, and every session gets an ordered
envelope stream (server-sent events) that can resume from any sequence
number without gaps.
"""

from __future__ import annotations

import asyncio
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .agent import AgentError, DebugAgent, Session
from .backends import ScriptedBackend
from .bus import MessageBus
from .diagnostics import DetectorConfig, DiagnosisEvent, DiagnosticsEngine
from .evaluate import (ScenarioSpec, derive_watch, proactive_backend,
                       write_review_fixture)
from .faults import attach_injector, schedule_crash
from .kb import KnowledgeBase
from .scenario import build_consumers, build_sources

VALID_LEVELS = ("beginner", "intermediate", "expert")


class ServiceError(Exception):
    def __init__(self, status: int, detail: str):
        super().__init__(detail)
        self.status = status
        self.detail = detail


@dataclass
class ApiSession:
    id: str
    level: str
    created_at: float
    status: str

    def to_dict(self) -> dict:
        return {"id": self.id, "level": self.level,
                "created_at": self.created_at, "status": self.status}


@dataclass
class _SessionState:
    session: Session
    api: ApiSession
    envelopes: list = field(default_factory=list)
    seq: int = 0


class ServiceRuntime:
    """Simulation + agent state shared by all HTTP handlers."""

    def __init__(self, scenario: Optional[ScenarioSpec] = None,
                 detector_config: Optional[DetectorConfig] = None,
                 kb_path: Optional[str] = None,
                 workspace_root: Optional[str] = None,
                 backend: Optional[ScriptedBackend] = None,
                 session_store: Optional[str] = None,
                 clock: Optional[object] = None):
        self._lock = threading.RLock()
        self.bus = MessageBus()
        self.session_store = session_store
        self.injector = None
        self.scenario = scenario

        if scenario is not None:
            build_sources(self.bus, scenario.workload, scenario.seed)
            if scenario.fault is not None:
                self.injector = attach_injector(self.bus, scenario.fault)
            build_consumers(self.bus, scenario.workload)
            if scenario.node_crash is not None:
                schedule_crash(self.bus, scenario.node_crash,
                               run_duration_ms=scenario.duration_ms)

        self.engine = DiagnosticsEngine(self.bus, detector_config, enabled=True)
        if scenario is not None:
            for entry in (scenario.watch or derive_watch(scenario)):
                self.engine.watch(entry["topic"],
                                  nominal_period=round(1000 / entry["rate_hz"]))
            if workspace_root and (scenario.fault is not None
                                   or scenario.node_crash is not None):
                write_review_fixture(scenario, Path(workspace_root))

        self.kb = KnowledgeBase(path=kb_path, clock=clock)
        context_vars = {}
        if scenario is not None and scenario.fault is not None:
            context_vars["review_path"] = "injector_node.py"
        elif scenario is not None and scenario.node_crash is not None:
            context_vars["review_path"] = "kill_node_script.py"
        self.agent = DebugAgent(self.bus, kb=self.kb, engine=self.engine,
                                backend=backend or proactive_backend(),
                                workspace_root=workspace_root,
                                context_vars=context_vars)
        self._states: dict[str, _SessionState] = {}
        self.engine.listeners.append(self._on_event)
        if session_store and Path(session_store).exists():
            self._load_sessions(session_store)

    # -- simulation ------------------------------------------------------

    def advance(self, duration_ms: int) -> None:
        with self._lock:
            self.bus.advance(duration_ms)

    # -- envelopes ---------------------------------------------------------

    def _push(self, state: _SessionState, kind: str, payload: dict) -> dict:
        state.seq += 1
        envelope = {"kind": kind, "payload": payload, "seq": state.seq}
        state.envelopes.append(envelope)
        return envelope

    def _on_event(self, event: DiagnosisEvent) -> None:
        for state in self._states.values():
            if state.api.status != "active":
                continue
            note = self.agent.notify(state.session, event)
            self._push(state, "diagnosis", {
                "event": event.to_dict(), "text": note.text,
                "fix_token": note.fix_token, "actions": list(note.actions)})
        self._persist()

    # -- session operations ------------------------------------------------

    def create_session(self, level: str) -> ApiSession:
        if level not in VALID_LEVELS:
            raise ServiceError(400, f"level must be one of {', '.join(VALID_LEVELS)}")
        with self._lock:
            session = self.agent.start_session(level)
            api = ApiSession(id=session.id, level=level,
                             created_at=time.time(), status="active")
            state = _SessionState(session=session, api=api)
            self._states[session.id] = state
            greeting = session.transcript[0]["text"]
            self._push(state, "system", {"text": greeting})
            # Replay notifications for episodes that were already open.
            for event in self.engine.events:
                if (event.topic, event.category) in self.engine.open_episodes:
                    note = self.agent.notify(session, event)
                    self._push(state, "diagnosis", {
                        "event": event.to_dict(), "text": note.text,
                        "fix_token": note.fix_token, "actions": list(note.actions)})
            self._persist()
            return api

    def _state(self, session_id: str) -> _SessionState:
        state = self._states.get(session_id)
        if state is None:
            raise ServiceError(404, f"unknown session {session_id!r}")
        return state

    def post_message(self, session_id: str, text: str) -> dict:
        with self._lock:
            state = self._state(session_id)
            if state.api.status != "active":
                raise ServiceError(409, f"session {session_id} is {state.api.status}")
            if not text or not text.strip():
                raise ServiceError(400, "message text must be non-empty")
            try:
                reply = self.agent.chat(state.session, text)
            except AgentError as exc:
                raise ServiceError(409, str(exc)) from exc
            envelope = self._push(state, "agent_reply", {"text": reply})
            self._persist()
            return envelope

    def events_after(self, session_id: str, after_seq: int = 0) -> list:
        with self._lock:
            state = self._state(session_id)
            return [e for e in state.envelopes if e["seq"] > after_seq]

    def apply_fix(self, session_id: str, event_id: str) -> dict:
        with self._lock:
            state = self._state(session_id)
            session = state.session
            if event_id not in session.events:
                raise ServiceError(404, f"unknown event {event_id!r}")
            if state.api.status != "active" or event_id not in session.open_events:
                raise ServiceError(409, f"event {event_id} already resolved")
            event = session.events[event_id]
            if event.category == "node_crash":
                obs = self.agent.tools.invoke("restart_node",
                                              {"node": event.suspected_node})
                fixed = obs.startswith("restarted")
                detail = obs
            else:
                fixed = False
                detail = (f"{event.category} on {event.topic or 'stream'} persists; "
                          f"fix actions are limited to restarting nodes, and the "
                          f"interception is still active")
            if fixed:
                self.agent.resolve_and_record(
                    session, outcome=f"restarted node {event.suspected_node}")
                state.api.status = "resolved"
            payload = {"event_id": event_id, "fixed": fixed, "detail": detail,
                       "followup": "Would you like to debug further?"}
            envelope = self._push(state, "fix_result", payload)
            self._persist()
            return envelope

    # -- persistence ---------------------------------------------------------

    def _persist(self) -> None:
        if not self.session_store:
            return
        doc = {"sessions": []}
        for state in self._states.values():
            doc["sessions"].append({
                "api": state.api.to_dict(), "seq": state.seq,
                "envelopes": state.envelopes,
                "open_events": list(state.session.open_events),
                "transcript": state.session.transcript})
        Path(self.session_store).write_text(json.dumps(doc))

    def _load_sessions(self, path: str) -> None:
        doc = json.loads(Path(path).read_text())
        for entry in doc.get("sessions", []):
            api = ApiSession(**entry["api"])
            session = self.agent.start_session(api.level)
            # Keep the persisted identity rather than the freshly assigned one.
            del self.agent.sessions[session.id]
            session.id = api.id
            session.transcript = entry["transcript"]
            session.status = api.status
            self.agent.sessions[api.id] = session
            state = _SessionState(session=session, api=api,
                                  envelopes=entry["envelopes"], seq=entry["seq"])
            self._states[api.id] = state


def create_app(runtime: ServiceRuntime, frontend_dir: Optional[str] = None,
               pace_ms_per_s: int = 0):
    """FastAPI application over a runtime; pace > 0 starts a sim-advance task."""
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse, StreamingResponse
    from fastapi.staticfiles import StaticFiles

    app = FastAPI(title="robotriage")
    app.state.runtime = runtime

    @app.exception_handler(ServiceError)
    async def _service_error(request: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status, content={"detail": exc.detail})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "sim_time_ms": runtime.bus.clock,
                "sessions": len(runtime._states)}

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        return runtime.create_session(body.get("level", "")).to_dict()

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, body: dict):
        return runtime.post_message(session_id, body.get("text", ""))

    @app.post("/sessions/{session_id}/events/{event_id}/fix")
    def apply_fix(session_id: str, event_id: str):
        return runtime.apply_fix(session_id, event_id)

    @app.get("/sessions/{session_id}/events")
    async def stream_events(session_id: str, after_seq: int = 0, wait: bool = False):
        runtime._state(session_id)  # 404 before the stream starts

        async def generate():
            last = after_seq
            yield "retry: 1000\n\n"
            while True:
                batch = runtime.events_after(session_id, last)
                for env in batch:
                    last = env["seq"]
                    yield (f"id: {env['seq']}\nevent: {env['kind']}\n"
                           f"data: {json.dumps(env)}\n\n")
                if not wait:
                    break
                await asyncio.sleep(0.1)

        return StreamingResponse(generate(), media_type="text/event-stream")

    if pace_ms_per_s > 0:
        @app.on_event("startup")
        async def _start_pacer():
            async def pace():
                tick_s = 0.1
                while True:
                    await asyncio.sleep(tick_s)
                    runtime.advance(int(pace_ms_per_s * tick_s))
            app.state.pacer = asyncio.create_task(pace())

    if frontend_dir and Path(frontend_dir).exists():
        app.mount("/ui", StaticFiles(directory=frontend_dir, html=True), name="ui")

    return app
