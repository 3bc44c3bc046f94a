"""HTTP surface: sessions, chat, event stream, fix actions, persistence."""

from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from robotriage.evaluate import default_scenario
from robotriage.service import ServiceRuntime, create_app


def make_runtime(category="node_crash", tmp_path=None, session_store=None):
    counter = iter(range(1, 1 << 30))
    return ServiceRuntime(scenario=default_scenario(category),
                          workspace_root=str(tmp_path) if tmp_path else None,
                          session_store=session_store,
                          clock=lambda: float(next(counter)))


@pytest.fixture
def service(tmp_path):
    runtime = make_runtime(tmp_path=tmp_path)
    app = create_app(runtime)
    return runtime, TestClient(app)


def parse_sse(text: str) -> list:
    events = []
    for block in text.strip().split("\n\n"):
        data_lines = [ln[len("data: "):] for ln in block.splitlines()
                      if ln.startswith("data: ")]
        if data_lines:
            events.append(json.loads("\n".join(data_lines)))
    return events


class TestSessions:
    def test_create_201_with_id(self, service):
        _, client = service
        resp = client.post("/sessions", json={"level": "beginner"})
        assert resp.status_code == 201
        assert resp.json()["id"].startswith("sess-")

    def test_invalid_level_400_lists_allowed(self, service):
        _, client = service
        resp = client.post("/sessions", json={"level": "guru"})
        assert resp.status_code == 400
        assert "beginner" in resp.json()["detail"]

    def test_two_creates_distinct_ids(self, service):
        _, client = service
        a = client.post("/sessions", json={"level": "expert"}).json()["id"]
        b = client.post("/sessions", json={"level": "expert"}).json()["id"]
        assert a != b

    def test_healthz(self, service):
        _, client = service
        doc = client.get("/healthz").json()
        assert doc["status"] == "ok"
        assert "sim_time_ms" in doc


class TestMessages:
    def test_purpose_question_gets_shaped_reply(self, tmp_path):
        runtime = make_runtime(category="lidar_corrupt", tmp_path=tmp_path)
        client = TestClient(create_app(runtime))
        sid = client.post("/sessions", json={"level": "intermediate"}).json()["id"]
        resp = client.post(f"/sessions/{sid}/messages", json={
            "text": "Tell me about the purpose of the laser_fault_injector node"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["kind"] == "agent_reply"
        assert "intercepts" in body["payload"]["text"]
        assert "Publishers:" in body["payload"]["text"]

    def test_unknown_session_404(self, service):
        _, client = service
        assert client.post("/sessions/sess-99/messages",
                           json={"text": "hi"}).status_code == 404

    def test_empty_text_400(self, service):
        _, client = service
        sid = client.post("/sessions", json={"level": "expert"}).json()["id"]
        assert client.post(f"/sessions/{sid}/messages",
                           json={"text": "  "}).status_code == 400

    def test_resolved_session_409(self, service):
        runtime, client = service
        sid = client.post("/sessions", json={"level": "expert"}).json()["id"]
        runtime.advance(2500)  # crash fires, notification lands
        envs = runtime.events_after(sid)
        eid = [e for e in envs if e["kind"] == "diagnosis"][0]["payload"]["event"]["id"]
        client.post(f"/sessions/{sid}/events/{eid}/fix")
        resp = client.post(f"/sessions/{sid}/messages", json={"text": "hello"})
        assert resp.status_code == 409


class TestEventStream:
    def test_diagnosis_arrives_before_agent_reply(self, service):
        runtime, client = service
        sid = client.post("/sessions", json={"level": "expert"}).json()["id"]
        runtime.advance(2500)
        client.post(f"/sessions/{sid}/messages", json={"text": "what is happening"})
        kinds = [e["kind"] for e in runtime.events_after(sid)]
        assert kinds.index("diagnosis") < kinds.index("agent_reply")

    def test_seq_gapless_and_resume(self, service):
        runtime, client = service
        sid = client.post("/sessions", json={"level": "expert"}).json()["id"]
        runtime.advance(2500)
        client.post(f"/sessions/{sid}/messages", json={"text": "status?"})
        full = parse_sse(client.get(f"/sessions/{sid}/events",
                                    params={"after_seq": 0}).text)
        seqs = [e["seq"] for e in full]
        assert seqs == list(range(1, len(seqs) + 1))
        resumed = parse_sse(client.get(f"/sessions/{sid}/events",
                                       params={"after_seq": 1}).text)
        assert [e["seq"] for e in resumed] == seqs[1:]

    def test_two_subscribers_identical_sequences(self, service):
        runtime, client = service
        sid = client.post("/sessions", json={"level": "expert"}).json()["id"]
        runtime.advance(2500)
        a = client.get(f"/sessions/{sid}/events", params={"after_seq": 0}).text
        b = client.get(f"/sessions/{sid}/events", params={"after_seq": 0}).text
        assert parse_sse(a) == parse_sse(b)

    def test_unknown_session_404(self, service):
        _, client = service
        assert client.get("/sessions/sess-404/events").status_code == 404


class TestApplyFix:
    def test_crash_fix_restarts_and_recovers(self, service):
        runtime, client = service
        sid = client.post("/sessions", json={"level": "beginner"}).json()["id"]
        runtime.advance(2500)
        envs = runtime.events_after(sid)
        diag = [e for e in envs if e["kind"] == "diagnosis"][0]
        assert diag["payload"]["event"]["category"] == "node_crash"
        eid = diag["payload"]["event"]["id"]
        resp = client.post(f"/sessions/{sid}/events/{eid}/fix")
        assert resp.status_code == 200
        payload = resp.json()["payload"]
        assert payload["fixed"] is True
        assert "debug further" in payload["followup"].lower()
        runtime.advance(1500)  # recovery window
        assert runtime.engine.health["/scan"].episode == "Healthy"
        assert runtime.engine.open_episodes == {}
        assert len(runtime.kb) == 1

    def test_corrupt_event_is_not_fixed(self, tmp_path):
        runtime = make_runtime(category="lidar_corrupt", tmp_path=tmp_path)
        client = TestClient(create_app(runtime))
        sid = client.post("/sessions", json={"level": "expert"}).json()["id"]
        runtime.advance(500)
        envs = runtime.events_after(sid)
        eid = [e for e in envs if e["kind"] == "diagnosis"][0]["payload"]["event"]["id"]
        payload = client.post(f"/sessions/{sid}/events/{eid}/fix").json()["payload"]
        assert payload["fixed"] is False
        assert "debug further" in payload["followup"].lower()

    def test_double_fix_409(self, service):
        runtime, client = service
        sid = client.post("/sessions", json={"level": "expert"}).json()["id"]
        runtime.advance(2500)
        eid = [e for e in runtime.events_after(sid)
               if e["kind"] == "diagnosis"][0]["payload"]["event"]["id"]
        assert client.post(f"/sessions/{sid}/events/{eid}/fix").status_code == 200
        assert client.post(f"/sessions/{sid}/events/{eid}/fix").status_code == 409

    def test_unknown_event_404(self, service):
        _, client = service
        sid = client.post("/sessions", json={"level": "expert"}).json()["id"]
        assert client.post(f"/sessions/{sid}/events/evt-99/fix").status_code == 404


class TestServeConfig:
    def test_fault_free_workload_scenario_serves(self, tmp_path):
        import yaml
        from robotriage.evaluate import load_scenario_spec
        doc = {"duration_ms": 60000, "seed": 42,
               "sources": [{"kind": "lidar", "name": "lidar_src",
                            "topic": "/scan", "rate_hz": 10}],
               "consumers": [{"name": "nav_consumer", "topic": "/scan",
                              "stall_log_after_ms": 2000}]}
        path = tmp_path / "healthy.yaml"
        path.write_text(yaml.safe_dump(doc))
        spec = load_scenario_spec(str(path), require_fault=False)
        runtime = ServiceRuntime(scenario=spec)
        runtime.advance(5000)
        assert runtime.engine.events == []
        assert "/scan" in runtime.engine.health

    def test_frontend_served_when_built(self):
        from pathlib import Path
        dist = Path(__file__).resolve().parents[1] / "frontend" / "dist"
        if not dist.exists():
            pytest.skip("frontend not built")
        runtime = make_runtime()
        client = TestClient(create_app(runtime, frontend_dir=str(dist)))
        resp = client.get("/ui/")
        assert resp.status_code == 200
        assert "robotriage console" in resp.text

    def test_transcript_export_is_json(self, service):
        import json as json_mod
        runtime, client = service
        sid = client.post("/sessions", json={"level": "expert"}).json()["id"]
        client.post(f"/sessions/{sid}/messages", json={"text": "status please"})
        doc = json_mod.loads(runtime.agent.sessions[sid].transcript_json())
        assert doc["id"] == sid
        assert any(m["role"] == "user" for m in doc["transcript"])


class TestPersistence:
    def test_restart_replays_open_notifications(self, tmp_path):
        store = tmp_path / "sessions.json"
        runtime = make_runtime(tmp_path=tmp_path, session_store=str(store))
        client = TestClient(create_app(runtime))
        sid = client.post("/sessions", json={"level": "expert"}).json()["id"]
        runtime.advance(2500)
        before = runtime.events_after(sid)
        assert any(e["kind"] == "diagnosis" for e in before)

        revived = ServiceRuntime(scenario=default_scenario("node_crash"),
                                 session_store=str(store))
        client2 = TestClient(create_app(revived))
        replayed = parse_sse(client2.get(f"/sessions/{sid}/events",
                                         params={"after_seq": 0}).text)
        assert [e["seq"] for e in replayed] == [e["seq"] for e in before]
        assert any(e["kind"] == "diagnosis" for e in replayed)
