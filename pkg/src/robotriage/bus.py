"""Deterministic simulated publish/subscribe middleware with a virtual clock.

A ``MessageBus`` is a single-threaded discrete-event simulator: nodes
register, subscribe, and publish; timer-driven sources and one-shot
events sit in a heap ordered by (due time, node registration order,
creation order), which gives every run a total delivery order. Time
only moves inside ``advance``.

The ``/rosout`` topic is reserved for ``LogEntry`` payloads and is the
channel the log monitor consumes. Synthetic sensor sources and stall-
logging consumers stand in for a real robot workload.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import math
import struct
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Union

import numpy as np

from . import kernels

SimTime = int  # milliseconds since simulation start

ROSOUT = "/rosout"
SUPERVISOR = "supervisor"

LOG_LEVELS = ("DEBUG", "INFO", "WARN", "ERROR", "FATAL")


class BusError(Exception):
    """Base class for bus contract violations."""


class UnknownNodeError(BusError):
    pass


class DeadNodeError(BusError):
    pass


class DuplicateNodeError(BusError):
    pass


@dataclass(frozen=True)
class LogEntry:
    level: str
    node: str
    text: str

    def __post_init__(self) -> None:
        if self.level not in LOG_LEVELS:
            raise ValueError(f"log level must be one of {LOG_LEVELS}, got {self.level!r}")
        if not self.text:
            raise ValueError("log text must be non-empty")


@dataclass(frozen=True)
class LaserScan:
    ranges: np.ndarray
    angle_min: float = -math.pi
    angle_max: float = math.pi
    range_min: float = 0.12
    range_max: float = 3.5


@dataclass(frozen=True)
class Image:
    width: int
    height: int
    channels: int
    pixels: np.ndarray

    def __post_init__(self) -> None:
        expected = self.width * self.height * self.channels
        if self.pixels.size != expected:
            raise ValueError(f"pixel buffer length {self.pixels.size} != {expected}")


Payload = Union[LogEntry, LaserScan, Image]


@dataclass(frozen=True)
class Message:
    topic: str
    publisher: str
    seq: int
    stamp: SimTime
    payload: Payload


@dataclass
class Delivery:
    t: SimTime
    subscriber: str
    message: Message


@dataclass
class Publication:
    t: SimTime
    message: Message


@dataclass
class NodeRecord:
    name: str
    order: int
    alive: bool = True
    publishes: set = field(default_factory=set)
    subscribes: set = field(default_factory=set)
    meta: dict = field(default_factory=dict)


@dataclass
class KillReceipt:
    node: str
    time: SimTime
    killed: bool
    warning: Optional[str] = None


@dataclass(frozen=True)
class SubscriptionHandle:
    topic: str
    node: str
    order: int


def payload_digest(payload: Payload) -> str:
    """Stable 16-hex digest of the payload's canonical byte form."""
    h = hashlib.sha256()
    if isinstance(payload, LogEntry):
        h.update(b"log|")
        h.update(f"{payload.level}|{payload.node}|{payload.text}".encode())
    elif isinstance(payload, LaserScan):
        h.update(b"scan|")
        h.update(struct.pack("<4d", payload.angle_min, payload.angle_max,
                             payload.range_min, payload.range_max))
        h.update(np.ascontiguousarray(payload.ranges, dtype=np.float64).tobytes())
    elif isinstance(payload, Image):
        h.update(b"img|")
        h.update(struct.pack("<3i", payload.width, payload.height, payload.channels))
        h.update(np.ascontiguousarray(payload.pixels, dtype=np.uint8).tobytes())
    else:
        raise TypeError(f"unsupported payload type {type(payload)!r}")
    return h.hexdigest()[:16]


def payload_bytes_equal(a: Payload, b: Payload) -> bool:
    return payload_digest(a) == payload_digest(b)


# Default synthetic sensor geometry; scenario files may override per source.
LIDAR_PATTERN = {"ranges": 360, "range_min": 0.12, "range_max": 3.5,
                 "angle_min": -math.pi, "angle_max": math.pi}
CAMERA_PATTERN = {"width": 32, "height": 24, "channels": 3}


class _Event:
    __slots__ = ("node", "fn", "cancelled")

    def __init__(self, node: str, fn: Callable[[SimTime], None]):
        self.node = node
        self.fn = fn
        self.cancelled = False


class MessageBus:
    """Single simulation instance; create one per scenario run.

    ``trace=False`` drops per-message retention (long soak runs);
    publication and delivery counters stay exact either way.
    """

    def __init__(self, trace: bool = True) -> None:
        self.clock: SimTime = 0
        self.trace = trace
        self._nodes: dict[str, NodeRecord] = {}
        self._subs: dict[str, list[tuple[int, str, Callable[[Message, SimTime], None]]]] = {}
        self._sub_counter = 0
        self._seq: dict[tuple[str, str], int] = {}
        self._heap: list[tuple[SimTime, int, int]] = []
        self._events: dict[int, _Event] = {}
        self._event_counter = 0
        self.deliveries: list[Delivery] = []
        self.publications: list[Publication] = []
        self.publication_count: dict[str, int] = {}
        self.delivery_count: dict[tuple[str, str], int] = {}
        self.register_node(SUPERVISOR)

    # -- node registry ------------------------------------------------

    def register_node(self, name: str, **meta) -> NodeRecord:
        if not name:
            raise ValueError("node name must be non-empty")
        if name in self._nodes:
            raise DuplicateNodeError(f"node {name!r} already registered")
        rec = NodeRecord(name=name, order=len(self._nodes))
        rec.meta.update(meta)
        self._nodes[name] = rec
        return rec

    def node(self, name: str) -> NodeRecord:
        try:
            return self._nodes[name]
        except KeyError:
            raise UnknownNodeError(f"unknown node {name!r}") from None

    def nodes(self) -> list[NodeRecord]:
        return list(self._nodes.values())

    def is_alive(self, name: str) -> bool:
        return self.node(name).alive

    def liveness_view(self) -> Callable[[str], bool]:
        """Read-only liveness callable handed to the diagnostics engine."""
        return lambda name: name in self._nodes and self._nodes[name].alive

    # -- scheduling ---------------------------------------------------

    def schedule_at(self, due: SimTime, node: str, fn: Callable[[SimTime], None]) -> int:
        """One-shot event owned by ``node``; skipped if the node is dead at fire time."""
        rec = self.node(node)
        due = max(due, self.clock)
        self._event_counter += 1
        eid = self._event_counter
        self._events[eid] = _Event(node, fn)
        heapq.heappush(self._heap, (due, rec.order, eid))
        return eid

    def cancel(self, event_id: int) -> None:
        ev = self._events.get(event_id)
        if ev is not None:
            ev.cancelled = True

    def add_timer(self, node: str, period: int, fn: Callable[[SimTime], None],
                  first_at: Optional[SimTime] = None) -> None:
        """Repeating timer; stops when the owning node dies."""
        if period <= 0:
            raise ValueError("timer period must be positive")

        def fire(now: SimTime) -> None:
            fn(now)
            self.schedule_at(now + period, node, fire)

        self.schedule_at(self.clock + period if first_at is None else first_at, node, fire)

    def advance(self, duration: int) -> list[Delivery]:
        """Run all events due within ``duration`` ms; returns the deliveries made."""
        if duration < 0:
            raise ValueError("duration must be >= 0")
        deadline = self.clock + duration
        start = len(self.deliveries)
        while self._heap and self._heap[0][0] <= deadline:
            due, _, eid = heapq.heappop(self._heap)
            ev = self._events.pop(eid)
            if ev.cancelled:
                continue
            self.clock = max(self.clock, due)
            if not self._nodes[ev.node].alive:
                continue
            ev.fn(self.clock)
        self.clock = deadline
        return self.deliveries[start:]

    # -- pub/sub ------------------------------------------------------

    def subscribe(self, node: str, topic: str,
                  handler: Callable[[Message, SimTime], None]) -> SubscriptionHandle:
        rec = self.node(node)
        if not topic:
            raise ValueError("topic name must be non-empty")
        self._sub_counter += 1
        self._subs.setdefault(topic, []).append((self._sub_counter, node, handler))
        rec.subscribes.add(topic)
        return SubscriptionHandle(topic=topic, node=node, order=self._sub_counter)

    def publish(self, node: str, topic: str, payload: Payload) -> Message:
        rec = self.node(node)
        if not rec.alive:
            raise DeadNodeError(f"publish from killed node {node!r} rejected")
        if not topic:
            raise ValueError("topic name must be non-empty")
        if topic == ROSOUT and not isinstance(payload, LogEntry):
            raise TypeError(f"{ROSOUT} carries LogEntry only")
        key = (node, topic)
        seq = self._seq.get(key, 0)
        self._seq[key] = seq + 1
        rec.publishes.add(topic)
        msg = Message(topic=topic, publisher=node, seq=seq, stamp=self.clock, payload=payload)
        self._deliver(msg)
        return msg

    def forward(self, node: str, topic: str, msg: Message,
                payload: Optional[Payload] = None) -> Message:
        """Republish ``msg`` on another topic, preserving publisher, seq and stamp.

        This is the injector path: the forwarding node performs the send, but
        message identity (origin, sequence, stamp) flows through unchanged.
        """
        rec = self.node(node)
        if not rec.alive:
            raise DeadNodeError(f"forward from killed node {node!r} rejected")
        rec.publishes.add(topic)
        out = replace(msg, topic=topic, payload=msg.payload if payload is None else payload)
        self._deliver(out)
        return out

    def _deliver(self, msg: Message) -> None:
        self.publication_count[msg.topic] = self.publication_count.get(msg.topic, 0) + 1
        if self.trace:
            self.publications.append(Publication(self.clock, msg))
        for _, sub_node, handler in list(self._subs.get(msg.topic, [])):
            if self._nodes[sub_node].alive:
                key = (msg.topic, sub_node)
                self.delivery_count[key] = self.delivery_count.get(key, 0) + 1
                if self.trace:
                    self.deliveries.append(Delivery(self.clock, sub_node, msg))
                handler(msg, self.clock)

    def log(self, node: str, level: str, text: str) -> Message:
        return self.publish(node, ROSOUT, LogEntry(level=level, node=node, text=text))

    # -- liveness -----------------------------------------------------

    def kill_node(self, node_id: str) -> KillReceipt:
        rec = self.node(node_id)
        if not rec.alive:
            return KillReceipt(node=node_id, time=self.clock, killed=False,
                               warning="already dead")
        rec.alive = False
        self.log(SUPERVISOR, "FATAL", f"process died: {node_id}")
        return KillReceipt(node=node_id, time=self.clock, killed=True)

    def restart_node(self, node_id: str) -> KillReceipt:
        """Respawn a killed node; sources and consumers re-arm their timers."""
        rec = self.node(node_id)
        if rec.alive:
            return KillReceipt(node=node_id, time=self.clock, killed=False,
                               warning="already alive")
        rec.alive = True
        respawn = rec.meta.get("respawn")
        if respawn is not None:
            respawn()
        self.log(SUPERVISOR, "INFO", f"process restarted: {node_id}")
        return KillReceipt(node=node_id, time=self.clock, killed=False)

    # -- synthetic workload -------------------------------------------

    def spawn_sensor_source(self, kind: str, topic: str, rate: float,
                            pattern: Optional[dict] = None, seed: int = 0,
                            name: Optional[str] = None) -> str:
        if kind not in ("lidar", "camera"):
            raise ValueError(f"sensor kind must be lidar or camera, got {kind!r}")
        if rate <= 0:
            raise ValueError("rate must be > 0")
        node = name or f"{kind}_src"
        period = round(1000 / rate)
        spec = dict(LIDAR_PATTERN if kind == "lidar" else CAMERA_PATTERN)
        spec.update(pattern or {})
        rec = self.register_node(node, kind=kind, topic=topic, period_ms=period, seed=seed)
        stream = kernels.stream_id(seed, 0)
        state = {"frame": 0}

        if kind == "lidar":
            def make_payload(frame: int) -> Payload:
                fs = kernels.stream_id(stream, frame)
                ranges = kernels.lidar_ranges(fs, spec["ranges"], spec["range_min"], spec["range_max"])
                return LaserScan(ranges=ranges, angle_min=spec["angle_min"],
                                 angle_max=spec["angle_max"], range_min=spec["range_min"],
                                 range_max=spec["range_max"])
        else:
            def make_payload(frame: int) -> Payload:
                fs = kernels.stream_id(stream, frame)
                n = spec["width"] * spec["height"] * spec["channels"]
                return Image(width=spec["width"], height=spec["height"],
                             channels=spec["channels"], pixels=kernels.image_pixels(fs, n))

        def fire(now: SimTime) -> None:
            state["frame"] += 1
            self.publish(node, topic, make_payload(state["frame"]))

        def arm() -> None:
            self.add_timer(node, period, fire)

        rec.meta["respawn"] = arm
        rec.meta["pattern"] = spec
        rec.publishes.add(topic)
        arm()
        return node

    def spawn_consumer(self, topic: str, stall_log_after: int,
                       name: Optional[str] = None) -> str:
        if stall_log_after <= 0:
            raise ValueError("stall_log_after must be > 0")
        node = name or f"{topic.strip('/').replace('/', '_')}_consumer"
        rec = self.register_node(node, topic=topic, stall_log_after=stall_log_after)
        state = {"last": self.clock, "stalled": False, "pending": None}

        def check(now: SimTime) -> None:
            state["pending"] = None
            if not state["stalled"] and now - state["last"] >= stall_log_after:
                state["stalled"] = True
                self.log(node, "ERROR", f"no data on {topic}")

        def arm_check() -> None:
            if state["pending"] is not None:
                self.cancel(state["pending"])
            state["pending"] = self.schedule_at(self.clock + stall_log_after, node, check)

        def on_message(msg: Message, now: SimTime) -> None:
            state["last"] = now
            state["stalled"] = False
            arm_check()

        def arm() -> None:
            state["last"] = self.clock
            state["stalled"] = False
            arm_check()

        rec.meta["respawn"] = arm
        self.subscribe(node, topic, on_message)
        arm_check()
        return node

    # -- attribution --------------------------------------------------

    def publishers_of(self, topic: str) -> list[str]:
        """Nodes declaring the topic, in registration order (supervisor excluded)."""
        return [r.name for r in self._nodes.values()
                if topic in r.publishes and r.name != SUPERVISOR]

    def true_source(self, topic: str) -> tuple[Optional[str], list[str]]:
        """Walk injector input chains back to the originating node.

        Returns (source node or None, chain of nodes walked from the topic).
        """
        chain: list[str] = []
        seen = set()
        while True:
            pubs = self.publishers_of(topic)
            pubs = [p for p in pubs if p not in seen]
            if not pubs:
                return (chain[-1] if chain else None), chain
            node = pubs[0]
            chain.append(node)
            seen.add(node)
            rec = self._nodes[node]
            if "input_topic" in rec.meta:
                topic = rec.meta["input_topic"]
            else:
                return node, chain

    # -- traces -------------------------------------------------------

    def delivery_rows(self) -> list[dict]:
        return [{"t": d.t, "topic": d.message.topic, "publisher": d.message.publisher,
                 "seq": d.message.seq, "payload_digest": payload_digest(d.message.payload)}
                for d in self.deliveries]

    def publication_rows(self, topic: Optional[str] = None) -> list[dict]:
        pubs = self.publications if topic is None else \
            [p for p in self.publications if p.message.topic == topic]
        return [{"t": p.t, "publisher": p.message.publisher, "seq": p.message.seq,
                 "payload_digest": payload_digest(p.message.payload)} for p in pubs]

    def export_trace(self, path) -> None:
        with open(path, "w") as fh:
            for row in self.delivery_rows():
                fh.write(json.dumps(row) + "\n")

    def trace_digest(self) -> str:
        h = hashlib.sha256()
        for row in self.delivery_rows():
            h.update(json.dumps(row, sort_keys=True).encode())
            h.update(b"\n")
        return h.hexdigest()


def stream_digest(rows: Iterable[dict]) -> str:
    """Digest of an arbitrary row sequence, for trace comparisons."""
    h = hashlib.sha256()
    for row in rows:
        h.update(json.dumps(row, sort_keys=True).encode())
        h.update(b"\n")
    return h.hexdigest()
