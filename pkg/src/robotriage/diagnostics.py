"""Proactive error detection over log and sensor streams.

Two monitors feed one engine. The log monitor consumes ``/rosout`` and
classifies ERROR/FATAL entries (and exception-looking text) into
events. The sensor monitor keeps a per-topic health state machine fed
by message arrivals plus a periodic silence watchdog, and classifies
drop, delay, corruption, and node-crash conditions.

Detection rules and thresholds (all configurable, see DetectorConfig):

* delay: arrival staleness (now - stamp) above ``delay_factor`` nominal
  periods, sustained for ``delay_sustain`` consecutive messages.
* drop/crash: arrival gap above ``drop_factor`` nominal periods at a
  watchdog tick; the upstream source's liveness decides which.
* corruption: per-payload content verdict (invalid range values,
  blank image, or a dominating repeated value).

Episodes debounce duplicates: one event per (topic, category) until the
episode closes on recovery (``recovery_clean`` clean on-time messages)
or manual resolution. The core checks are pure functions of
(state, input), so replaying a trace reproduces identical events.
"""

from __future__ import annotations

import re
import statistics
from dataclasses import dataclass, field
from typing import Callable, Optional

import yaml

from . import kernels
from .bus import Image, LaserScan, LogEntry, Message, MessageBus, ROSOUT, SimTime

CATEGORIES = ("drop", "delay", "corrupt", "node_crash", "log_error")

_CRASH_RE = re.compile(r"process died: (\S+)")
_TOPIC_RE = re.compile(r"(/[A-Za-z0-9_][A-Za-z0-9_/]*)")

DEFAULT_LOG_PATTERNS = [r"Traceback", r"[Ee]xception", r"\bdied\b", r"[Ff]atal"]


@dataclass
class DetectorConfig:
    delay_factor: float = 3.0       # staleness threshold, in nominal periods
    delay_sustain: int = 3          # consecutive stale messages before a delay event
    drop_factor: float = 5.0        # silence threshold, in nominal periods
    repeated_fraction: float = 0.95
    invalid_fraction: float = 0.2
    blank_variance: float = 1.0
    recovery_clean: int = 10        # clean on-time messages that close an episode
    rate_learn_window: int = 20     # inter-arrivals used to learn an undeclared rate
    log_error_patterns: list = field(default_factory=lambda: list(DEFAULT_LOG_PATTERNS))

    @classmethod
    def from_yaml(cls, text: str) -> "DetectorConfig":
        doc = yaml.safe_load(text) or {}
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown detector config keys: {sorted(unknown)}")
        return cls(**doc)


@dataclass(frozen=True)
class ContentVerdict:
    kind: str  # clean | invalid_values | blank | repeated_values
    fraction: float = 0.0

    @property
    def clean(self) -> bool:
        return self.kind == "clean"


@dataclass
class TopicHealth:
    topic: str
    nominal_period: Optional[float]  # ms; None until declared or learned
    source: Optional[str] = None
    chain: list = field(default_factory=list)
    last_arrival: SimTime = 0
    last_stamp: SimTime = 0
    ewma_period: float = 0.0
    episode: str = "Healthy"
    arrivals: int = 0
    stale_streak: int = 0
    clean_streak: int = 0
    learn_buffer: list = field(default_factory=list)
    silence_flagged: bool = False


@dataclass
class DiagnosisEvent:
    id: str
    time: SimTime
    topic: str
    suspected_node: str
    category: str
    evidence: dict
    confidence: float

    def to_dict(self) -> dict:
        return {"id": self.id, "time": self.time, "topic": self.topic,
                "suspected_node": self.suspected_node, "category": self.category,
                "evidence": self.evidence, "confidence": self.confidence}


def _draft(time: SimTime, topic: str, node: str, category: str,
           evidence: dict, confidence: float) -> DiagnosisEvent:
    return DiagnosisEvent(id="", time=time, topic=topic, suspected_node=node,
                          category=category, evidence=evidence, confidence=confidence)


def classify_log(entry: LogEntry, now: SimTime = 0,
                 config: Optional[DetectorConfig] = None) -> Optional[DiagnosisEvent]:
    """Classify one /rosout entry; returns an un-ided event draft or None."""
    config = config or DetectorConfig()
    crash = _CRASH_RE.search(entry.text)
    if entry.level == "FATAL" and crash:
        node = crash.group(1)
        return _draft(now, "", node, "node_crash",
                      {"log_excerpt": entry.text, "level": entry.level}, 0.95)
    severe = entry.level in ("ERROR", "FATAL")
    pattern_hit = any(re.search(p, entry.text) for p in config.log_error_patterns)
    if not severe and not pattern_hit:
        return None
    topic_match = _TOPIC_RE.search(entry.text)
    topic = topic_match.group(1) if topic_match else ""
    return _draft(now, topic, entry.node, "log_error",
                  {"log_excerpt": entry.text, "level": entry.level}, 0.6)


def check_content(payload, config: Optional[DetectorConfig] = None) -> ContentVerdict:
    """Content verdict with precedence invalid_values > blank > repeated_values."""
    config = config or DetectorConfig()
    if isinstance(payload, LaserScan):
        n = int(payload.ranges.size)
        if n == 0:
            return ContentVerdict("clean")
        invalid, most_common = kernels.scan_stats(
            payload.ranges, payload.range_min, payload.range_max)
        invalid_frac = invalid / n
        repeated_frac = most_common / n
        if invalid_frac > config.invalid_fraction:
            return ContentVerdict("invalid_values", invalid_frac)
        if repeated_frac >= config.repeated_fraction:
            return ContentVerdict("repeated_values", repeated_frac)
        return ContentVerdict("clean")
    if isinstance(payload, Image):
        variance = kernels.pixel_variance(payload.pixels)
        if variance < config.blank_variance:
            return ContentVerdict("blank", 1.0)
        return ContentVerdict("clean")
    return ContentVerdict("clean")


def observe_message(state: TopicHealth, msg: Message, now: SimTime,
                    config: Optional[DetectorConfig] = None
                    ) -> tuple[TopicHealth, Optional[DiagnosisEvent]]:
    """Update per-topic health with one arrival; may yield a delay/corrupt event."""
    config = config or DetectorConfig()
    if state.arrivals > 0:
        inter = now - state.last_arrival
        state.ewma_period = inter if state.ewma_period == 0.0 \
            else 0.2 * inter + 0.8 * state.ewma_period
        if state.nominal_period is None:
            state.learn_buffer.append(inter)
            if len(state.learn_buffer) >= config.rate_learn_window:
                state.nominal_period = float(statistics.median(state.learn_buffer))
    state.arrivals += 1
    state.last_arrival = now
    state.last_stamp = msg.stamp
    state.silence_flagged = False

    staleness = now - msg.stamp
    stale = False
    if state.nominal_period is not None:
        if staleness > config.delay_factor * state.nominal_period:
            state.stale_streak += 1
            stale = True
        else:
            state.stale_streak = 0

    verdict = check_content(msg.payload, config)

    event: Optional[DiagnosisEvent] = None
    if not verdict.clean:
        state.episode = "Corrupted"
        event = _draft(now, state.topic, state.source or msg.publisher, "corrupt",
                       {"verdict": verdict.kind, "fraction": round(verdict.fraction, 4),
                        "seq": msg.seq}, 0.9)
    elif stale and state.stale_streak >= config.delay_sustain:
        state.episode = "Delayed"
        event = _draft(now, state.topic, state.source or msg.publisher, "delay",
                       {"staleness_ms": staleness,
                        "threshold_ms": config.delay_factor * state.nominal_period,
                        "sustained": state.stale_streak}, 0.85)

    if verdict.clean and not stale:
        state.clean_streak += 1
        if state.clean_streak >= config.recovery_clean and state.episode != "Healthy":
            state.episode = "Healthy"
    else:
        state.clean_streak = 0
    return state, event


def check_silence(state: TopicHealth, now: SimTime, liveness: Callable[[str], bool],
                  config: Optional[DetectorConfig] = None) -> Optional[DiagnosisEvent]:
    """Watchdog check: silence beyond the drop threshold is a drop or a crash."""
    config = config or DetectorConfig()
    if state.nominal_period is None:
        return None
    gap = now - state.last_arrival
    threshold = config.drop_factor * state.nominal_period
    if gap <= threshold:
        return None
    if state.silence_flagged:
        return None
    state.silence_flagged = True
    state.clean_streak = 0
    source = state.source or ""
    if source and not liveness(source):
        state.episode = "Stalled"
        return _draft(now, state.topic, source, "node_crash",
                      {"gap_ms": gap, "threshold_ms": threshold, "source_dead": True}, 0.95)
    state.episode = "Dropping"
    return _draft(now, state.topic, source, "drop",
                  {"gap_ms": gap, "threshold_ms": threshold, "source_dead": False}, 0.85)


def debounce(event: DiagnosisEvent, open_episodes: dict) -> Optional[DiagnosisEvent]:
    """Suppress the event if an episode with the same (topic, category) is open."""
    key = (event.topic, event.category)
    if key in open_episodes:
        return None
    open_episodes[key] = event.id or True
    return event


class DiagnosticsEngine:
    """Wires the pure detectors to a bus; owns events, episodes, and listeners."""

    MONITOR = "sensor_monitor"
    LOG_MONITOR = "log_monitor"

    def __init__(self, bus: MessageBus, config: Optional[DetectorConfig] = None,
                 enabled: bool = True):
        self.bus = bus
        self.config = config or DetectorConfig()
        self.enabled = enabled
        self.events: list[DiagnosisEvent] = []
        self.open_episodes: dict = {}
        self.health: dict[str, TopicHealth] = {}
        self.listeners: list[Callable[[DiagnosisEvent], None]] = []
        self._counter = 0
        self._tick_pending = False
        if enabled:
            bus.register_node(self.MONITOR, role="monitor")
            bus.register_node(self.LOG_MONITOR, role="monitor")
            bus.subscribe(self.LOG_MONITOR, ROSOUT, self._on_rosout)

    # -- wiring ---------------------------------------------------------

    def watch(self, topic: str, nominal_period: Optional[float] = None) -> TopicHealth:
        """Monitor a sensor topic; nominal period in ms, learned when omitted."""
        if not self.enabled:
            raise RuntimeError("detectors are disabled in queried-only mode")
        source, chain = self.bus.true_source(topic)
        state = TopicHealth(topic=topic, nominal_period=nominal_period,
                            source=source, chain=chain, last_arrival=self.bus.clock)
        self.health[topic] = state
        self.bus.subscribe(self.MONITOR, topic, self._on_message)
        self._arm_watchdog()
        return state

    def _watchdog_period(self) -> Optional[int]:
        periods = [s.nominal_period for s in self.health.values()
                   if s.nominal_period is not None]
        return int(min(periods)) if periods else None

    def _arm_watchdog(self) -> None:
        if self._tick_pending:
            return
        period = self._watchdog_period()
        if period is None:
            return
        self._tick_pending = True
        self.bus.schedule_at(self.bus.clock + period, self.MONITOR, self._tick)

    def _tick(self, now: SimTime) -> None:
        self._tick_pending = False
        liveness = self.bus.liveness_view()
        for state in self.health.values():
            event = check_silence(state, now, liveness, self.config)
            if event is not None:
                self._emit(event)
        self._arm_watchdog()

    def _on_message(self, msg: Message, now: SimTime) -> None:
        state = self.health.get(msg.topic)
        if state is None:
            return
        was_healthy = state.episode == "Healthy"
        state, event = observe_message(state, msg, now, self.config)
        if event is not None:
            self._emit(event)
        if state.episode == "Healthy" and not was_healthy:
            self.close_episodes(topic=state.topic)

    def _on_rosout(self, msg: Message, now: SimTime) -> None:
        entry = msg.payload
        if not isinstance(entry, LogEntry):
            return
        event = classify_log(entry, now, self.config)
        if event is None:
            return
        if event.category == "node_crash":
            # Attribute the crash to the watched topic the dead node feeds.
            for state in self.health.values():
                if event.suspected_node in state.chain or event.suspected_node == state.source:
                    event.topic = state.topic
                    state.episode = "Stalled"
                    break
        elif event.topic in self.health:
            state = self.health[event.topic]
            if state.source:
                event.suspected_node = state.source
        self._emit(event)

    # -- episode management ----------------------------------------------

    def _emit(self, event: DiagnosisEvent) -> None:
        if debounce(event, self.open_episodes) is None:
            return
        self._counter += 1
        event.id = f"evt-{self._counter}"
        self.open_episodes[(event.topic, event.category)] = event.id
        self.events.append(event)
        for listener in self.listeners:
            listener(event)

    def close_episodes(self, topic: Optional[str] = None,
                       category: Optional[str] = None) -> int:
        """Close open episodes (recovery or manual resolution); returns count closed."""
        keys = [k for k in self.open_episodes
                if (topic is None or k[0] == topic) and (category is None or k[1] == category)]
        for k in keys:
            del self.open_episodes[k]
        return len(keys)

    def open_event_ids(self) -> list[str]:
        return [v for v in self.open_episodes.values() if isinstance(v, str)]

    def event_rows(self) -> list[dict]:
        return [e.to_dict() for e in self.events]
