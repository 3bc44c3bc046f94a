"""YAML-driven fault injection for sensor topics, plus scheduled node crashes.

An injector is an ordinary bus node spliced between an input and an
output topic. Per intercepted message it makes one probabilistic draw
from its own counter-based stream (independent of every workload
stream, so toggling faults never perturbs the clean part of a trace)
and applies the configured action: pass through, corrupt the payload
with a constant fill, hold delivery for a fixed number of milliseconds,
or drop. Every decision lands in a ledger that downstream evaluation
uses as exact ground truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np
import yaml

from . import kernels
from .bus import Image, LaserScan, Message, MessageBus, Payload, SimTime

ERROR_TYPES = ("corrupted", "drop", "delay")
SENSOR_KINDS = ("lidar", "camera")
MESSAGE_TYPES = ("LaserScan", "Image")
_KIND_TO_TYPE = {"lidar": "LaserScan", "camera": "Image"}

FAULT_KEYS = {"sensor_kind", "message_type", "input_topic", "output_topic",
              "error_type", "error_value", "error_frequency", "seed"}
CRASH_KEYS = {"node_id", "at_time_ms"}

# Channel for the injector's trigger stream; keeps it disjoint from
# payload-generation streams even under equal seeds.
_TRIGGER_CHANNEL = 1


class FaultConfigError(ValueError):
    """Invalid fault configuration; message names the offending field."""


@dataclass(frozen=True)
class FaultSpec:
    sensor_kind: str
    message_type: str
    input_topic: str
    output_topic: str
    error_type: str
    error_value: float
    error_frequency: float
    seed: int = 0

    def validate(self) -> "FaultSpec":
        if self.sensor_kind not in SENSOR_KINDS:
            raise FaultConfigError(f"sensor_kind: must be one of {'|'.join(SENSOR_KINDS)}")
        if self.message_type not in MESSAGE_TYPES:
            raise FaultConfigError(f"message_type: must be one of {'|'.join(MESSAGE_TYPES)}")
        if _KIND_TO_TYPE[self.sensor_kind] != self.message_type:
            raise FaultConfigError(
                f"message_type: {self.message_type} inconsistent with sensor_kind {self.sensor_kind}")
        if not self.input_topic or not self.output_topic:
            raise FaultConfigError("input_topic/output_topic: must be non-empty")
        if self.input_topic == self.output_topic:
            raise FaultConfigError("output_topic: must differ from input_topic")
        if self.error_type not in ERROR_TYPES:
            raise FaultConfigError(
                f"error_type: must be one of {'|'.join(ERROR_TYPES)}, got {self.error_type!r}")
        if not (0.0 <= self.error_frequency <= 1.0):
            raise FaultConfigError(
                f"error_frequency: must lie in [0, 1], got {self.error_frequency}")
        if self.error_type == "delay" and not self.error_value > 0:
            raise FaultConfigError("error_value: delay requires a positive hold in ms")
        if not isinstance(self.seed, int):
            raise FaultConfigError("seed: must be an integer")
        return self


@dataclass(frozen=True)
class NodeCrashSpec:
    node_id: str
    at_time_ms: int

    def validate(self) -> "NodeCrashSpec":
        if not self.node_id:
            raise FaultConfigError("node_id: must be non-empty")
        if not isinstance(self.at_time_ms, int) or self.at_time_ms < 0:
            raise FaultConfigError("at_time_ms: must be a non-negative integer")
        return self


@dataclass(frozen=True)
class FaultAction:
    kind: str  # pass | corrupt | delay | drop
    payload: Optional[Payload] = None   # corrupt: replacement payload
    due: Optional[SimTime] = None       # delay: delivery time


def parse_fault_config(text: str) -> tuple[list[FaultSpec], list[NodeCrashSpec]]:
    """Parse the YAML fault document; unknown keys are rejected."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise FaultConfigError(f"parse-error: {exc}") from exc
    if doc is None:
        return [], []
    if not isinstance(doc, dict):
        raise FaultConfigError("top level: expected a mapping with 'faults'/'node_crashes'")
    unknown = set(doc) - {"faults", "node_crashes"}
    if unknown:
        raise FaultConfigError(f"unknown top-level keys: {sorted(unknown)}")

    faults = []
    for i, entry in enumerate(doc.get("faults") or []):
        if not isinstance(entry, dict):
            raise FaultConfigError(f"faults[{i}]: expected a mapping")
        extra = set(entry) - FAULT_KEYS
        if extra:
            raise FaultConfigError(f"faults[{i}]: unknown keys {sorted(extra)}")
        missing = FAULT_KEYS - {"seed"} - set(entry)
        if missing:
            raise FaultConfigError(f"faults[{i}]: missing keys {sorted(missing)}")
        seed = entry.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise FaultConfigError("seed: must be an integer")
        faults.append(FaultSpec(
            sensor_kind=entry["sensor_kind"], message_type=entry["message_type"],
            input_topic=entry["input_topic"], output_topic=entry["output_topic"],
            error_type=entry["error_type"], error_value=float(entry["error_value"]),
            error_frequency=float(entry["error_frequency"]), seed=seed,
        ).validate())

    crashes = []
    for i, entry in enumerate(doc.get("node_crashes") or []):
        if not isinstance(entry, dict):
            raise FaultConfigError(f"node_crashes[{i}]: expected a mapping")
        extra = set(entry) - CRASH_KEYS
        if extra:
            raise FaultConfigError(f"node_crashes[{i}]: unknown keys {sorted(extra)}")
        missing = CRASH_KEYS - set(entry)
        if missing:
            raise FaultConfigError(f"node_crashes[{i}]: missing keys {sorted(missing)}")
        crashes.append(NodeCrashSpec(node_id=entry["node_id"],
                                     at_time_ms=entry["at_time_ms"]).validate())
    return faults, crashes


def corrupt_payload(payload: Payload, fill: float) -> Payload:
    """Constant-fill corruption of the data array; metadata untouched."""
    if isinstance(payload, LaserScan):
        return replace(payload, ranges=np.full(payload.ranges.shape, fill, dtype=np.float64))
    if isinstance(payload, Image):
        value = int(fill) & 0xFF
        return replace(payload, pixels=np.full(payload.pixels.shape, value, dtype=np.uint8))
    raise FaultConfigError(f"type-mismatch: cannot corrupt payload of type {type(payload).__name__}")


def decide_action(spec: FaultSpec, msg: Message, trigger_draw: float,
                  now: SimTime) -> FaultAction:
    """Map one probabilistic draw to the configured fault action."""
    expected = LaserScan if spec.message_type == "LaserScan" else Image
    if not isinstance(msg.payload, expected):
        raise FaultConfigError(
            f"type-mismatch: expected {spec.message_type}, got {type(msg.payload).__name__}")
    if trigger_draw >= spec.error_frequency:
        return FaultAction(kind="pass")
    if spec.error_type == "corrupted":
        return FaultAction(kind="corrupt", payload=corrupt_payload(msg.payload, spec.error_value))
    if spec.error_type == "delay":
        return FaultAction(kind="delay", due=now + int(spec.error_value))
    return FaultAction(kind="drop")


@dataclass
class LedgerEntry:
    t: SimTime
    seq: int
    action: str


class FaultInjector:
    """Bus node applying a FaultSpec between two topics."""

    def __init__(self, bus: MessageBus, spec: FaultSpec, name: str):
        self.bus = bus
        self.spec = spec.validate()
        self.name = name
        self.ledger: list[LedgerEntry] = []
        self._trigger_stream = kernels.stream_id(spec.seed, _TRIGGER_CHANNEL)
        self._count = 0
        rec = bus.register_node(name, input_topic=spec.input_topic,
                                output_topic=spec.output_topic, role="fault_injector")
        rec.publishes.add(spec.output_topic)
        bus.subscribe(name, spec.input_topic, self._on_message)

    def _on_message(self, msg: Message, now: SimTime) -> None:
        draw = kernels.u01_at(self._trigger_stream, self._count)
        self._count += 1
        action = decide_action(self.spec, msg, draw, now)
        self.ledger.append(LedgerEntry(t=now, seq=msg.seq, action=action.kind))
        if action.kind == "pass":
            self.bus.forward(self.name, self.spec.output_topic, msg)
        elif action.kind == "corrupt":
            self.bus.forward(self.name, self.spec.output_topic, msg, payload=action.payload)
        elif action.kind == "delay":
            held = msg
            self.bus.schedule_at(
                action.due, self.name,
                lambda _now, held=held: self.bus.forward(self.name, self.spec.output_topic, held))
        # drop: withhold entirely

    # -- ground truth -------------------------------------------------

    def counts(self) -> dict:
        out = {"pass": 0, "corrupt": 0, "delay": 0, "drop": 0}
        for entry in self.ledger:
            out[entry.action] += 1
        return out

    def onset_time(self) -> Optional[SimTime]:
        """Time of the first non-pass action; None if the fault never triggered."""
        for entry in self.ledger:
            if entry.action != "pass":
                return entry.t
        return None

    def ledger_rows(self) -> list[dict]:
        return [{"t": e.t, "seq": e.seq, "action": e.action} for e in self.ledger]

    def export_ledger(self, path) -> None:
        with open(path, "w") as fh:
            for row in self.ledger_rows():
                fh.write(json.dumps(row) + "\n")


def injector_name(bus: MessageBus, spec: FaultSpec) -> str:
    base = "laser_fault_injector" if spec.message_type == "LaserScan" else "image_fault_injector"
    name = base
    n = 1
    while True:
        try:
            bus.node(name)
        except Exception:
            return name
        n += 1
        name = f"{base}_{n}"


def attach_injector(bus: MessageBus, spec: FaultSpec) -> FaultInjector:
    """Splice an injector node between spec.input_topic and spec.output_topic."""
    spec = spec.validate()
    for rec in bus.nodes():
        if rec.meta.get("role") == "fault_injector" \
                and rec.meta.get("input_topic") == spec.input_topic \
                and rec.meta.get("output_topic") == spec.output_topic:
            raise FaultConfigError(
                f"duplicate injector on ({spec.input_topic}, {spec.output_topic})")
    return FaultInjector(bus, spec, injector_name(bus, spec))


@dataclass
class CrashReceipt:
    node_id: str
    at_time_ms: int


def schedule_crash(bus: MessageBus, spec: Union[NodeCrashSpec, dict],
                   run_duration_ms: Optional[int] = None) -> CrashReceipt:
    """Arrange for kill_node(node_id) to fire at the configured time."""
    if isinstance(spec, dict):
        spec = NodeCrashSpec(**spec)
    spec.validate()
    bus.node(spec.node_id)  # unknown-node check
    if run_duration_ms is not None and spec.at_time_ms > run_duration_ms:
        raise FaultConfigError(
            f"at_time_ms: {spec.at_time_ms} beyond run duration {run_duration_ms}")
    script = "crash_script"
    try:
        bus.node(script)
    except Exception:
        bus.register_node(script, role="crash_script")
    bus.schedule_at(spec.at_time_ms, script, lambda _now: bus.kill_node(spec.node_id))
    return CrashReceipt(node_id=spec.node_id, at_time_ms=spec.at_time_ms)
