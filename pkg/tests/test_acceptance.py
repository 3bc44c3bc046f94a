"""Acceptance suite: one test per acceptance criterion, pass/fail printed.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. Tolerances are pinned here, not calibrated elsewhere.
"""

from __future__ import annotations

import json
import random
import time

import pytest

from robotriage.agent import (DebugAgent, count_definition_markers,
                              has_interface_section)
from robotriage.bus import MessageBus, payload_digest
from robotriage.code_review import match_findings, summarize_path
from robotriage.diagnostics import DiagnosticsEngine
from robotriage.evaluate import (CATEGORIES_7, default_scenario,
                                 deterministic_judge, build_guideline,
                                 ground_truth, run_scenario,
                                 score_boolean_criteria, write_review_fixture)
from robotriage.faults import FaultSpec, attach_injector
from robotriage.kb import KnowledgeBase, brute_force_filter, tokenize
from robotriage.service import ServiceRuntime, create_app
from test_eval import TRUTH_DROP, fixture_report
from test_kb import synthetic_store

RUNS_PER_CATEGORY = 20

# Latency bounds in ms, per category kind (period p, delay hold d, tick = p):
#   corrupt <= p; delay <= 3p + d; drop/crash <= 5p + p.
def latency_bound(spec) -> int:
    if spec.node_crash is not None:
        period = round(1000 / spec.watch[0]["rate_hz"])
        return 6 * period
    period = round(1000 / spec.watch[0]["rate_hz"])
    if spec.fault.error_type == "corrupted":
        return period
    if spec.fault.error_type == "delay":
        return 3 * period + int(spec.fault.error_value)
    return 6 * period


def _announce(name: str, ok: bool) -> None:
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}")
    assert ok


class TestAcceptance:
    def test_01_proactive_detection_100_percent(self):
        t0 = time.monotonic()
        failures = []
        for category in CATEGORIES_7:
            spec = default_scenario(category)
            spec.duration_ms = 4000
            bound = latency_bound(spec)
            for rep in range(RUNS_PER_CATEGORY):
                result = run_scenario(spec, rep=rep)
                if not result.detected:
                    failures.append((category, rep, "missed"))
                elif result.detection_latency_ms > bound:
                    failures.append((category, rep,
                                     f"latency {result.detection_latency_ms} > {bound}"))
        wall = time.monotonic() - t0
        ok = not failures and wall < 60.0
        print(f"  [{RUNS_PER_CATEGORY} runs x {len(CATEGORIES_7)} categories "
              f"in {wall:.1f}s wall; failures: {failures[:5]}]")
        _announce("proactive detection 100%", ok)

    def test_02_zero_false_positives_100_minutes(self):
        bus = MessageBus(trace=False)
        bus.spawn_sensor_source("lidar", "/scan", 10, seed=101)
        bus.spawn_sensor_source("camera", "/camera/image", 5, seed=102)
        bus.spawn_consumer("/scan", 2000, name="nav_consumer")
        bus.spawn_consumer("/camera/image", 2000, name="viz_consumer")
        engine = DiagnosticsEngine(bus)
        engine.watch("/scan", nominal_period=100)
        engine.watch("/camera/image", nominal_period=200)
        bus.advance(100 * 60 * 1000)
        print(f"  [100 simulated minutes, {bus.publication_count['/scan']} scans, "
              f"{len(engine.events)} events]")
        _announce("zero false positives", len(engine.events) == 0)

    def test_03_baseline_contrast_shape(self):
        detected = {}
        for category in CATEGORIES_7:
            spec = default_scenario(category, mode="queried")
            spec.duration_ms = 4000
            results = [run_scenario(spec, rep=rep) for rep in range(3)]
            assert all(len(r.events) == 0 for r in results), "detectors not disabled"
            detected[category] = all(r.detected for r in results) \
                if any(r.detected for r in results) else False
        corrupt_rows = {"lidar_corrupt", "image_corrupt"}
        pattern_ok = all(detected[c] for c in corrupt_rows) and \
            not any(detected[c] for c in set(CATEGORIES_7) - corrupt_rows)
        queried_avg = sum(detected.values()) / len(detected)
        print(f"  [queried detection avg {queried_avg:.2f} vs proactive 1.00; "
              f"per-row: {detected}]")
        _announce("baseline contrast", pattern_ok and queried_avg < 1.0)

    def test_04_injector_statistics(self):
        # (a) frequency 0.3 over 10,000 messages: fraction within +/-0.0137
        spec = FaultSpec(sensor_kind="lidar", message_type="LaserScan",
                         input_topic="/scan", output_topic="/scan_out",
                         error_type="corrupted", error_value=0.0,
                         error_frequency=0.3, seed=42)
        bus = MessageBus()
        bus.spawn_sensor_source("lidar", "/scan", 1000, seed=5)
        injector = attach_injector(bus, spec)
        bus.advance(10_000)
        counts = injector.counts()
        fraction = counts["corrupt"] / sum(counts.values())
        stats_ok = sum(counts.values()) == 10_000 and abs(fraction - 0.3) <= 0.0137

        # (b) frequency 0: byte-identical passthrough
        def projection(b, topic):
            return [(p.t, p.message.seq, payload_digest(p.message.payload))
                    for p in b.publications if p.message.topic == topic]
        bus0 = MessageBus()
        bus0.spawn_sensor_source("lidar", "/scan", 10, seed=5)
        attach_injector(bus0, FaultSpec(**{**vars(spec), "error_frequency": 0.0}))
        bus0.advance(3000)
        passthrough_ok = projection(bus0, "/scan") == projection(bus0, "/scan_out")

        # (c) frequency 1 + drop: zero output messages
        bus1 = MessageBus()
        bus1.spawn_sensor_source("lidar", "/scan", 10, seed=5)
        attach_injector(bus1, FaultSpec(**{**vars(spec), "error_type": "drop",
                                           "error_frequency": 1.0}))
        bus1.advance(3000)
        drop_ok = bus1.publication_count.get("/scan_out", 0) == 0

        print(f"  [fraction {fraction:.4f} in [0.2863, 0.3137]; "
              f"passthrough {passthrough_ok}; total drop {drop_ok}]")
        _announce("injector statistics", stats_ok and passthrough_ok and drop_ok)

    def test_05_determinism(self):
        ok = True
        for category in CATEGORIES_7:
            spec = default_scenario(category)
            spec.duration_ms = 4000
            a = run_scenario(spec, rep=0)
            b = run_scenario(spec, rep=0)
            same = (a.trace_digest == b.trace_digest
                    and a.events == b.events
                    and json.dumps(a.report.to_dict()) == json.dumps(b.report.to_dict()))
            if not same:
                ok = False
                print(f"  [nondeterminism in {category}]")
        _announce("determinism", ok)

    def test_06_criteria_abc_saturate_with_mock(self):
        total = {"A": [], "B": [], "C": []}
        for category in CATEGORIES_7:
            spec = default_scenario(category)
            spec.duration_ms = 4000
            for rep in range(5):
                result = run_scenario(spec, rep=rep)
                a, b, c = score_boolean_criteria(result.report, result.truth)
                total["A"].append(a)
                if b is not None:
                    total["B"].append(b)
                total["C"].append(c)
        abc_ok = all(all(v) for v in total.values())

        # Scoring pipeline validated on hand-labeled fixtures.
        exact = score_boolean_criteria(fixture_report(), TRUTH_DROP) == (True, True, True)
        wrong_node = score_boolean_criteria(
            fixture_report(identified_node="camera_src"), TRUTH_DROP)[0] is False
        wrong_type = score_boolean_criteria(
            fixture_report(identified_error_type="delay"), TRUTH_DROP)[2] is False
        normalized = score_boolean_criteria(
            fixture_report(identified_node="/lidar_src",
                           identified_topic="scan_out"), TRUTH_DROP) == \
            (True, True, True)
        pipeline_ok = exact and wrong_node and wrong_type and normalized
        print(f"  [A {sum(total['A'])}/{len(total['A'])}, "
              f"B {sum(total['B'])}/{len(total['B'])}, "
              f"C {sum(total['C'])}/{len(total['C'])}; fixtures {pipeline_ok}]")
        _announce("criteria A-C 100%", abc_ok and pipeline_ok)

    def test_07_criterion_h_plumbing(self, tmp_path):
        spec = default_scenario("lidar_corrupt")
        name = write_review_fixture(spec, tmp_path)
        summary = summarize_path(name, str(tmp_path))
        truth = ground_truth(spec)
        findings = match_findings(summary, None)
        markers = [f for f in findings if f.kind == "injection-marker"]
        report = fixture_report(code_findings=[f.to_dict() for f in markers])
        scores = deterministic_judge(report, build_guideline(truth))
        print(f"  [{len(markers)} injection-marker findings; H={scores['H']}]")
        _announce("criterion H plumbing", len(markers) >= 1 and scores["H"] >= 8)

    def test_08_kb_retrieval(self):
        kb, planted = synthetic_store(n=1000)
        rank1 = kb.retrieve("flickerband on /scan_out", k=5)[0].record_id == planted.id

        # Two-stage containment over 10,000 random queries.
        rng = random.Random(7)
        vocab = sorted({t for r in kb.records for t in r.keywords}) + \
            ["unseen", "qqq", "zzz", "lidar", "scan_out"]
        containment = True
        for _ in range(10_000):
            query = " ".join(rng.sample(vocab, rng.randint(1, 4)))
            allowed = kb.keyword_filter(tokenize(query))
            got = {r.record_id for r in kb.retrieve(query, k=8)}
            if not got <= allowed:
                containment = False
                break

        # Inverted index equals linear scan on random stores.
        index_ok = True
        for seed in range(20):
            srng = random.Random(seed)
            counter = iter(range(1, 10_000))
            store = KnowledgeBase(clock=lambda: float(next(counter)))
            words = ["lidar", "camera", "drop", "delay", "corrupt", "scan",
                     "image", "node", "crash", "blank", "stream", "frame"]
            for _ in range(srng.randint(1, 30)):
                store.add_record(" ".join(srng.sample(words, srng.randint(1, 5))),
                                 "", ["fix"])
            for _ in range(25):
                q = set(srng.sample(words + ["nothing"], srng.randint(1, 3)))
                if store.keyword_filter(q) != brute_force_filter(q, store.records):
                    index_ok = False
        print(f"  [rank1 {rank1}; containment(10k) {containment}; "
              f"index==scan {index_ok}]")
        _announce("KB retrieval", rank1 and containment and index_ok)

    def test_09_expertise_shaping(self):
        bus = MessageBus()
        bus.spawn_sensor_source("lidar", "/scan", 10, seed=3)
        attach_injector(bus, FaultSpec(
            sensor_kind="lidar", message_type="LaserScan", input_topic="/scan",
            output_topic="/scan_out", error_type="corrupted", error_value=0.0,
            error_frequency=0.3, seed=1))
        agent = DebugAgent(bus)
        query = "Tell me about the purpose of the laser_fault_injector node"
        outputs = {}
        for level in ("beginner", "intermediate", "expert"):
            session = agent.start_session(level)
            outputs[level] = agent.chat(session, query)
        ok = (count_definition_markers(outputs["beginner"]) >= 2
              and not has_interface_section(outputs["beginner"])
              and count_definition_markers(outputs["intermediate"]) == 0
              and has_interface_section(outputs["intermediate"])
              and count_definition_markers(outputs["expert"]) == 0
              and has_interface_section(outputs["expert"])
              and len(outputs["expert"]) < len(outputs["intermediate"])
              and len(outputs["expert"]) < len(outputs["beginner"]))
        print(f"  [markers b/i/e: {count_definition_markers(outputs['beginner'])}/"
              f"{count_definition_markers(outputs['intermediate'])}/"
              f"{count_definition_markers(outputs['expert'])}; lengths "
              f"{[len(outputs[l]) for l in ('beginner', 'intermediate', 'expert')]}]")
        _announce("expertise shaping", ok)

    def test_10_end_to_end_fix_loop(self, tmp_path):
        kb_path = tmp_path / "kb.jsonl"
        counter = iter(range(1, 1 << 30))
        runtime = ServiceRuntime(scenario=default_scenario("node_crash"),
                                 workspace_root=str(tmp_path),
                                 kb_path=str(kb_path),
                                 clock=lambda: float(next(counter)))
        from fastapi.testclient import TestClient
        client = TestClient(create_app(runtime))
        sid = client.post("/sessions", json={"level": "intermediate"}).json()["id"]
        runtime.advance(2500)
        diags = [e for e in runtime.events_after(sid) if e["kind"] == "diagnosis"]
        notified = len(diags) == 1 and \
            diags[0]["payload"]["event"]["category"] == "node_crash"
        eid = diags[0]["payload"]["event"]["id"]
        fix = client.post(f"/sessions/{sid}/events/{eid}/fix").json()["payload"]
        runtime.advance(1500)
        recovered = (runtime.engine.health["/scan"].episode == "Healthy"
                     and runtime.engine.open_episodes == {}
                     and runtime.bus.is_alive("lidar_src"))
        kb_grew = len(runtime.kb) == 1

        # Re-run the same fault with the persisted store: the new record
        # must surface at rank 1 through the agent's RAG-first lookup.
        shared = KnowledgeBase(path=str(kb_path),
                               clock=lambda: float(next(counter)))
        rerun = run_scenario(default_scenario("node_crash"), rep=1, kb=shared)
        first_step = rerun.report.diagnostics_run[0]
        rag_hit = (first_step["tool"] == "kb_lookup"
                   and "1. kb-000001" in first_step["summary"])
        rank1 = shared.retrieve("node_crash process died lidar_src",
                                k=3)[0].record_id == "kb-000001"
        print(f"  [notified {notified}; fixed {fix['fixed']}; recovered {recovered}; "
              f"kb {kb_grew}; rag rank1 {rag_hit and rank1}]")
        _announce("end-to-end fix loop",
                  notified and fix["fixed"] and recovered and kb_grew
                  and rag_hit and rank1)
