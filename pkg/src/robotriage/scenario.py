"""Workload scenario files: declared sources, consumers, duration, seeds.

A scenario YAML drives both the evaluation harness and the live
service. Per-source seeds, when not given explicitly, are derived from
the scenario seed and the source index, so adding a source never
reshuffles the streams of existing ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import yaml

from . import kernels
from .bus import MessageBus

_SOURCE_KEYS = {"kind", "topic", "rate_hz", "name", "seed", "pattern"}
_CONSUMER_KEYS = {"topic", "stall_log_after_ms", "name"}


class ScenarioError(ValueError):
    pass


@dataclass
class SourceSpec:
    kind: str
    topic: str
    rate_hz: float
    name: Optional[str] = None
    seed: Optional[int] = None
    pattern: Optional[dict] = None

    @property
    def period_ms(self) -> int:
        return round(1000 / self.rate_hz)


@dataclass
class ConsumerSpec:
    topic: str
    stall_log_after_ms: int = 1000
    name: Optional[str] = None


@dataclass
class Workload:
    sources: list = field(default_factory=list)
    consumers: list = field(default_factory=list)

    def source_for_topic(self, topic: str) -> Optional[SourceSpec]:
        for src in self.sources:
            if src.topic == topic:
                return src
        return None


def workload_from_dict(doc: dict) -> Workload:
    sources = []
    for i, entry in enumerate(doc.get("sources") or []):
        extra = set(entry) - _SOURCE_KEYS
        if extra:
            raise ScenarioError(f"sources[{i}]: unknown keys {sorted(extra)}")
        if "kind" not in entry or "topic" not in entry or "rate_hz" not in entry:
            raise ScenarioError(f"sources[{i}]: kind, topic and rate_hz are required")
        sources.append(SourceSpec(**entry))
    consumers = []
    for i, entry in enumerate(doc.get("consumers") or []):
        extra = set(entry) - _CONSUMER_KEYS
        if extra:
            raise ScenarioError(f"consumers[{i}]: unknown keys {sorted(extra)}")
        if "topic" not in entry:
            raise ScenarioError(f"consumers[{i}]: topic is required")
        consumers.append(ConsumerSpec(**entry))
    return Workload(sources=sources, consumers=consumers)


def derive_seed(base_seed: int, index: int) -> int:
    """Independent per-source seed from the scenario seed."""
    return kernels.stream_id(base_seed, index + 1) & 0x7FFFFFFF


def build_sources(bus: MessageBus, workload: Workload, base_seed: int) -> list:
    names = []
    for i, src in enumerate(workload.sources):
        seed = src.seed if src.seed is not None else derive_seed(base_seed, i)
        names.append(bus.spawn_sensor_source(
            kind=src.kind, topic=src.topic, rate=src.rate_hz,
            pattern=src.pattern, seed=seed, name=src.name))
    return names


def build_consumers(bus: MessageBus, workload: Workload) -> list:
    return [bus.spawn_consumer(topic=c.topic, stall_log_after=c.stall_log_after_ms,
                               name=c.name)
            for c in workload.consumers]


def load_scenario_file(path: str) -> dict:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ScenarioError(f"scenario file {path}: expected a mapping")
    return doc
