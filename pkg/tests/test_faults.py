"""Fault configuration parsing and injector semantics."""

from __future__ import annotations

import math

import numpy as np
import pytest

from robotriage.bus import MessageBus, payload_digest
from robotriage.faults import (FaultConfigError, FaultSpec, NodeCrashSpec,
                               attach_injector, decide_action,
                               parse_fault_config, schedule_crash)
from conftest import make_scan

VALID_YAML = """
faults:
  - sensor_kind: lidar
    message_type: LaserScan
    input_topic: /scan
    output_topic: /scan_out
    error_type: corrupted
    error_value: 0.0
    error_frequency: 0.3
    seed: 42
node_crashes:
  - node_id: lidar_src
    at_time_ms: 5000
"""


def lidar_fault(**overrides) -> FaultSpec:
    base = dict(sensor_kind="lidar", message_type="LaserScan", input_topic="/scan",
                output_topic="/scan_out", error_type="corrupted", error_value=0.0,
                error_frequency=0.3, seed=42)
    base.update(overrides)
    return FaultSpec(**base)


class TestParseConfig:
    def test_valid_document(self):
        faults, crashes = parse_fault_config(VALID_YAML)
        assert len(faults) == 1 and len(crashes) == 1
        assert faults[0].error_type == "corrupted"
        assert faults[0].error_frequency == 0.3
        assert crashes[0] == NodeCrashSpec(node_id="lidar_src", at_time_ms=5000)

    def test_frequency_out_of_range_names_field(self):
        bad = VALID_YAML.replace("error_frequency: 0.3", "error_frequency: 1.5")
        with pytest.raises(FaultConfigError, match="error_frequency"):
            parse_fault_config(bad)

    def test_bad_error_type_lists_allowed_values(self):
        bad = VALID_YAML.replace("error_type: corrupted", "error_type: delya")
        with pytest.raises(FaultConfigError, match="corrupted\\|drop\\|delay"):
            parse_fault_config(bad)

    def test_unknown_keys_rejected(self):
        bad = VALID_YAML.replace("seed: 42", "seed: 42\n    magnitude: 3")
        with pytest.raises(FaultConfigError, match="magnitude"):
            parse_fault_config(bad)

    def test_missing_seed_defaults_to_zero(self):
        text = VALID_YAML.replace("    seed: 42\n", "")
        faults, _ = parse_fault_config(text)
        assert faults[0].seed == 0

    def test_parse_error_on_malformed_yaml(self):
        with pytest.raises(FaultConfigError, match="parse-error"):
            parse_fault_config("faults: [unclosed")

    def test_kind_type_consistency(self):
        with pytest.raises(FaultConfigError, match="message_type"):
            lidar_fault(message_type="Image").validate()

    def test_same_input_output_rejected(self):
        with pytest.raises(FaultConfigError, match="output_topic"):
            lidar_fault(output_topic="/scan").validate()

    def test_delay_needs_positive_hold(self):
        with pytest.raises(FaultConfigError, match="error_value"):
            lidar_fault(error_type="delay", error_value=0).validate()


class TestDecideAction:
    def test_draw_above_frequency_passes(self, bus):
        msg = _publish_one(bus)
        action = decide_action(lidar_fault(), msg, trigger_draw=0.9, now=100)
        assert action.kind == "pass"

    def test_corrupt_fills_every_range_and_keeps_metadata(self, bus):
        msg = _publish_one(bus)
        action = decide_action(lidar_fault(error_value=0.0), msg, 0.1, now=100)
        assert action.kind == "corrupt"
        assert np.all(action.payload.ranges == 0.0)
        assert action.payload.ranges.size == 360
        assert action.payload.range_min == msg.payload.range_min
        assert action.payload.angle_min == msg.payload.angle_min
        assert msg.stamp == 0  # original untouched

    def test_delay_due_arithmetic(self, bus):
        msg = _publish_one(bus)
        action = decide_action(lidar_fault(error_type="delay", error_value=500),
                               msg, 0.1, now=10_000)
        assert action.kind == "delay" and action.due == 10_500

    def test_drop(self, bus):
        msg = _publish_one(bus)
        assert decide_action(lidar_fault(error_type="drop"), msg, 0.0, 0).kind == "drop"

    def test_type_mismatch(self, bus):
        msg = _publish_one(bus)
        camera = lidar_fault(sensor_kind="camera", message_type="Image")
        with pytest.raises(FaultConfigError, match="type-mismatch"):
            decide_action(camera, msg, 0.1, 0)


def _publish_one(bus):
    bus.register_node("src")
    return bus.publish("src", "/scan", make_scan())


def _run_with_injector(spec, duration=3000, rate=10, seed=5):
    bus = MessageBus()
    bus.spawn_sensor_source("lidar", spec.input_topic, rate, seed=seed)
    injector = attach_injector(bus, spec)
    bus.register_node("sink")
    outs = []
    bus.subscribe("sink", spec.output_topic, lambda m, t: outs.append((t, m)))
    bus.advance(duration)
    return bus, injector, outs


def _topic_projection(bus, topic):
    """(t, seq, digest) rows of a topic's publication stream."""
    return [(p.t, p.message.seq, payload_digest(p.message.payload))
            for p in bus.publications if p.message.topic == topic]


class TestInjector:
    def test_passthrough_identity_at_zero_frequency(self):
        spec = lidar_fault(error_frequency=0.0)
        bus, _, outs = _run_with_injector(spec)
        assert _topic_projection(bus, "/scan") == _topic_projection(bus, "/scan_out")
        assert len(outs) == 30

    def test_full_drop_yields_no_output(self):
        spec = lidar_fault(error_type="drop", error_frequency=1.0)
        bus, injector, outs = _run_with_injector(spec)
        assert outs == []
        assert injector.counts()["drop"] == 30

    def test_duplicate_injector_rejected(self):
        bus = MessageBus()
        bus.spawn_sensor_source("lidar", "/scan", 10, seed=5)
        attach_injector(bus, lidar_fault())
        with pytest.raises(FaultConfigError, match="duplicate injector"):
            attach_injector(bus, lidar_fault(error_type="drop"))

    def test_trigger_fraction_within_3_sigma(self):
        # 3-sigma binomial interval for p=0.3, n=10000:
        # sqrt(0.3 * 0.7 / 10000) ~= 0.00458 -> [0.2863, 0.3137].
        spec = lidar_fault(error_frequency=0.3, seed=42)
        bus = MessageBus()
        bus.spawn_sensor_source("lidar", "/scan", 1000, seed=5)
        injector = attach_injector(bus, spec)
        bus.advance(10_000)
        counts = injector.counts()
        total = sum(counts.values())
        assert total == 10_000
        fraction = counts["corrupt"] / total
        sigma3 = 3 * math.sqrt(0.3 * 0.7 / 10_000)
        assert abs(fraction - 0.3) <= sigma3

    def test_delay_preserves_payload_stamp_and_order(self):
        spec = lidar_fault(error_type="delay", error_value=500, error_frequency=1.0)
        bus, _, outs = _run_with_injector(spec, duration=3000)
        ins = {p.message.seq: p for p in bus.publications
               if p.message.topic == "/scan"}
        for t, msg in outs:
            source = ins[msg.seq]
            assert t == source.t + 500  # delivery = interception + hold
            assert msg.stamp == source.message.stamp
            assert payload_digest(msg.payload) == payload_digest(source.message.payload)
        seqs = [m.seq for _, m in outs]
        assert seqs == sorted(seqs)  # relative order preserved

    def test_corruption_changes_only_data_array(self):
        spec = lidar_fault(error_frequency=1.0, error_value=0.0)
        bus, _, outs = _run_with_injector(spec, duration=1000)
        ins = {p.message.seq: p.message for p in bus.publications
               if p.message.topic == "/scan"}
        for _, msg in outs:
            src = ins[msg.seq]
            assert np.all(msg.payload.ranges == 0.0)
            assert msg.payload.angle_min == src.payload.angle_min
            assert msg.payload.range_max == src.payload.range_max
            assert msg.stamp == src.stamp and msg.seq == src.seq

    def test_drop_never_mutates_survivors(self):
        spec = lidar_fault(error_type="drop", error_frequency=0.5, seed=9)
        bus, _, outs = _run_with_injector(spec, duration=5000)
        in_digests = {payload_digest(p.message.payload)
                      for p in bus.publications if p.message.topic == "/scan"}
        assert outs  # some survive at p=0.5
        for _, msg in outs:
            assert payload_digest(msg.payload) in in_digests

    def test_ledger_schema_and_onset(self):
        spec = lidar_fault(error_type="drop", error_frequency=1.0)
        bus, injector, _ = _run_with_injector(spec, duration=1000)
        rows = injector.ledger_rows()
        assert all(set(r) == {"t", "seq", "action"} for r in rows)
        assert injector.onset_time() == rows[0]["t"] == 100


class TestScheduleCrash:
    def test_crash_silences_topic_from_kill_time(self):
        bus = MessageBus()
        bus.spawn_sensor_source("lidar", "/scan", 10, seed=5)
        schedule_crash(bus, NodeCrashSpec(node_id="lidar_src", at_time_ms=5000),
                       run_duration_ms=10_000)
        bus.advance(10_000)
        assert bus.publication_count["/scan"] == 50  # messages up to t=5000

    def test_crash_beyond_duration_rejected(self):
        bus = MessageBus()
        bus.register_node("n")
        with pytest.raises(FaultConfigError, match="at_time_ms"):
            schedule_crash(bus, NodeCrashSpec(node_id="n", at_time_ms=9000),
                           run_duration_ms=8000)

    def test_crash_unknown_node(self):
        bus = MessageBus()
        with pytest.raises(Exception):
            schedule_crash(bus, NodeCrashSpec(node_id="ghost", at_time_ms=10))

    def test_crash_consumer_leaves_sensor_stream_untouched(self):
        # Oracle: the same seeded run without the crash.
        def run(crash):
            b = MessageBus()
            b.spawn_sensor_source("lidar", "/scan", 10, seed=5)
            b.spawn_consumer("/scan", 1000, name="nav_consumer")
            if crash:
                schedule_crash(b, NodeCrashSpec(node_id="nav_consumer",
                                                at_time_ms=2000), 8000)
            b.advance(8000)
            stall_logs = [p for p in b.publications
                          if p.message.topic == "/rosout"
                          and p.message.payload.level == "ERROR"]
            return _topic_projection(b, "/scan"), stall_logs

        crashed_trace, crashed_logs = run(crash=True)
        clean_trace, clean_logs = run(crash=False)
        assert crashed_trace == clean_trace
        assert crashed_logs == [] and clean_logs == []
