"""Scenario runner and scorer for the seven fault categories.

``run_scenario`` builds a fresh simulator per repetition, applies the
configured fault, and produces a (trace, report, ground truth) triple.
Proactive mode wires the detectors and auto-triggers the agent on the
first diagnosis event; queried-only mode disables the detectors
entirely and issues the probe prompts instead, approximating a baseline
assistant with no monitoring of its own.

Scoring covers detection recall and latency, boolean criteria A-C
(node/topic/error type), and judged criteria D-H. The deterministic
fallback judge is a pure structural rubric; an external judge can be
plugged in over HTTP and falls back when unreachable. ``aggregate``
renders the per-category table.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import yaml

from .agent import DebugAgent, DebugReport, normalize_node, normalize_topic
from .backends import ScriptedBackend
from .bus import MessageBus
from .diagnostics import DetectorConfig, DiagnosticsEngine
from .faults import FaultSpec, NodeCrashSpec, attach_injector, schedule_crash
from .kb import KnowledgeBase
from .scenario import ScenarioError, Workload, build_consumers, build_sources, \
    derive_seed, workload_from_dict

CATEGORIES_7 = ("lidar_drop", "lidar_delay", "lidar_corrupt",
                "image_drop", "image_delay", "image_corrupt", "node_crash")

CRITERIA = ("A", "B", "C", "D", "E", "F", "G", "H")

_ACTION_VERBS = ("restart", "check", "inspect", "verify", "review", "replace",
                 "reconnect", "rerun", "examine", "confirm", "monitor", "update",
                 "calibrate", "reattach", "investigate")

_RELEVANT_TOOLS = {
    "drop": {"topic_hz", "topic_echo"},
    "delay": {"topic_echo", "topic_hz"},
    "corrupt": {"topic_echo"},
    "node_crash": {"node_info", "list_nodes", "read_log_tail"},
    "log_error": {"read_log_tail"},
}


@dataclass
class ScenarioSpec:
    name: str
    mode: str = "proactive"  # proactive | queried
    repetitions: int = 5
    duration_ms: int = 8000
    seed: int = 42
    workload: Workload = field(default_factory=Workload)
    fault: Optional[FaultSpec] = None
    node_crash: Optional[NodeCrashSpec] = None
    watch: list = field(default_factory=list)  # [{"topic": ..., "rate_hz": ...}]
    detector_config: DetectorConfig = field(default_factory=DetectorConfig)

    def validate(self, require_fault: bool = True) -> "ScenarioSpec":
        if self.mode not in ("proactive", "queried"):
            raise ScenarioError(f"mode must be proactive or queried, got {self.mode!r}")
        if self.repetitions < 1:
            raise ScenarioError("repetitions must be >= 1")
        if self.fault is not None and self.node_crash is not None:
            raise ScenarioError("exactly one of fault / node_crash per scenario")
        if require_fault and self.fault is None and self.node_crash is None:
            raise ScenarioError("exactly one of fault / node_crash per scenario")
        return self

    @classmethod
    def from_dict(cls, doc: dict, require_fault: bool = True) -> "ScenarioSpec":
        fault = FaultSpec(**doc["fault"]).validate() if doc.get("fault") else None
        crash = NodeCrashSpec(**doc["node_crash"]).validate() if doc.get("node_crash") else None
        workload_doc = doc.get("workload")
        if workload_doc is None and ("sources" in doc or "consumers" in doc):
            # Plain workload files (e.g. scenarios/healthy.yaml) are valid
            # fault-free scenarios for serving.
            workload_doc = {"sources": doc.get("sources"),
                            "consumers": doc.get("consumers")}
        return cls(
            name=doc.get("name", "scenario"),
            mode=doc.get("mode", "proactive"),
            repetitions=int(doc.get("repetitions", 5)),
            duration_ms=int(doc.get("duration_ms", 8000)),
            seed=int(doc.get("seed", 42)),
            workload=workload_from_dict(workload_doc or {}),
            fault=fault, node_crash=crash,
            watch=list(doc.get("watch") or []),
        ).validate(require_fault=require_fault)

    def to_dict(self) -> dict:
        doc = {"name": self.name, "mode": self.mode, "repetitions": self.repetitions,
               "duration_ms": self.duration_ms, "seed": self.seed,
               "workload": {
                   "sources": [{k: v for k, v in vars(s).items() if v is not None}
                               for s in self.workload.sources],
                   "consumers": [{k: v for k, v in vars(c).items() if v is not None}
                                 for c in self.workload.consumers]},
               "watch": self.watch}
        if self.fault is not None:
            doc["fault"] = vars(self.fault).copy()
        if self.node_crash is not None:
            doc["node_crash"] = vars(self.node_crash).copy()
        return doc


@dataclass
class GroundTruth:
    true_topic: Optional[str]
    true_node: str
    true_category: str

    def to_dict(self) -> dict:
        return {"true_topic": self.true_topic, "true_node": self.true_node,
                "true_category": self.true_category}


def ground_truth(spec: ScenarioSpec) -> GroundTruth:
    """Mechanically derived from the fault configuration, never hand-entered."""
    if spec.node_crash is not None:
        return GroundTruth(true_topic=None, true_node=spec.node_crash.node_id,
                           true_category="node_crash")
    fault = spec.fault
    category = {"corrupted": "corrupt", "drop": "drop", "delay": "delay"}[fault.error_type]
    src = spec.workload.source_for_topic(fault.input_topic)
    node = src.name if src and src.name else f"{fault.sensor_kind}_src"
    return GroundTruth(true_topic=fault.output_topic, true_node=node,
                       true_category=category)


# ---------------------------------------------------------------------------
# built-in scenario set (Table-shaped seven categories)


def default_scenario(category: str, mode: str = "proactive", seed: int = 42,
                     repetitions: int = 5) -> ScenarioSpec:
    if category not in CATEGORIES_7:
        raise ScenarioError(f"unknown category {category!r}; pick from {CATEGORIES_7}")
    lidar = category.startswith("lidar") or category == "node_crash"
    sensor = "lidar" if lidar else "camera"
    in_topic = "/scan" if lidar else "/camera/image"
    rate = 10.0 if lidar else 5.0
    src_name = f"{sensor}_src"

    if category == "node_crash":
        workload = workload_from_dict({
            "sources": [{"kind": sensor, "topic": in_topic, "rate_hz": rate,
                         "name": src_name}],
            "consumers": [{"topic": in_topic, "stall_log_after_ms": 2000,
                           "name": "nav_consumer"}]})
        return ScenarioSpec(
            name=category, mode=mode, repetitions=repetitions, seed=seed,
            duration_ms=8000, workload=workload,
            node_crash=NodeCrashSpec(node_id=src_name, at_time_ms=2000),
            watch=[{"topic": in_topic, "rate_hz": rate}]).validate()

    out_topic = in_topic + "_out"
    kind_error = category.split("_", 1)[1]
    error_type = {"drop": "drop", "delay": "delay", "corrupt": "corrupted"}[kind_error]
    # Delay holds must exceed the delay threshold (3 periods) while staying
    # at or below the drop threshold (5 periods), so the silence watchdog
    # cannot misread fault onset as a drop.
    period = round(1000 / rate)
    error_value = {"drop": 0.0, "delay": float(4 * period), "corrupted": 0.0}[error_type]
    fault = FaultSpec(
        sensor_kind=sensor, message_type="LaserScan" if lidar else "Image",
        input_topic=in_topic, output_topic=out_topic, error_type=error_type,
        error_value=error_value, error_frequency=1.0, seed=seed).validate()
    workload = workload_from_dict({
        "sources": [{"kind": sensor, "topic": in_topic, "rate_hz": rate,
                     "name": src_name}],
        "consumers": [{"topic": out_topic, "stall_log_after_ms": 2000,
                       "name": "nav_consumer"}]})
    return ScenarioSpec(
        name=category, mode=mode, repetitions=repetitions, seed=seed,
        duration_ms=8000, workload=workload, fault=fault,
        watch=[{"topic": out_topic, "rate_hz": rate}]).validate()


_INJECTOR_SOURCE = '''\
"""Interceptor node between {input_topic} and {output_topic}."""

error_type = "{error_type}"
error_value = {error_value}
error_frequency = {error_frequency}
input_topic = "{input_topic}"
output_topic = "{output_topic}"
inject_enabled = True


def should_trigger(random_draw):
    return inject_enabled and random_draw < error_frequency


def corrupt_message(msg):
    msg.data = [error_value for _ in msg.data]
    return msg


def delay_message(msg):
    return msg, int(error_value)


def drop_message(msg):
    return None


def apply_fault(msg, random_draw):
    if not should_trigger(random_draw):
        return msg
    if error_type == "corrupted":
        return corrupt_message(msg)
    if error_type == "delay":
        return delay_message(msg)
    return drop_message(msg)
'''

_CRASH_SOURCE = '''\
"""Script that force-terminates a node by id at a scheduled time."""

target_node = "{node_id}"
kill_at_ms = {at_time_ms}


def terminate(supervisor):
    supervisor.kill(target_node)
'''


def write_review_fixture(spec: ScenarioSpec, directory: Path) -> str:
    """Write the interceptor/crash script the code-review tool will scan."""
    directory.mkdir(parents=True, exist_ok=True)
    if spec.fault is not None:
        name = "injector_node.py"
        text = _INJECTOR_SOURCE.format(**vars(spec.fault))
    else:
        name = "kill_node_script.py"
        text = _CRASH_SOURCE.format(node_id=spec.node_crash.node_id,
                                    at_time_ms=spec.node_crash.at_time_ms)
    (directory / name).write_text(text)
    return name


def _load_script(name: str) -> ScriptedBackend:
    text = resources.files("robotriage.data.scripts").joinpath(name).read_text()
    return ScriptedBackend.from_yaml(text)


def proactive_backend() -> ScriptedBackend:
    return _load_script("proactive.yaml")


def queried_backend() -> ScriptedBackend:
    return _load_script("queried_baseline.yaml")


# ---------------------------------------------------------------------------
# run


@dataclass
class RunResult:
    scenario: str
    rep: int
    mode: str
    truth: GroundTruth
    report: DebugReport
    events: list                 # DiagnosisEvent dicts
    ledger: list
    trace_digest: str
    onset_ms: Optional[int]
    detected: bool
    detection_latency_ms: Optional[int]

    def to_meta(self) -> dict:
        return {"scenario": self.scenario, "rep": self.rep, "mode": self.mode,
                "trace_digest": self.trace_digest, "onset_ms": self.onset_ms,
                "detected": self.detected,
                "detection_latency_ms": self.detection_latency_ms}


def run_scenario(spec: ScenarioSpec, rep: int = 0, out_dir: Optional[Path] = None,
                 backend: Optional[ScriptedBackend] = None,
                 kb: Optional[KnowledgeBase] = None,
                 expertise: str = "intermediate") -> RunResult:
    spec.validate()
    rep_seed = spec.seed + rep
    bus = MessageBus()
    build_sources(bus, spec.workload, rep_seed)

    injector = None
    if spec.fault is not None:
        fault = FaultSpec(**{**vars(spec.fault), "seed": spec.fault.seed + rep})
        injector = attach_injector(bus, fault)
    build_consumers(bus, spec.workload)
    if spec.node_crash is not None:
        schedule_crash(bus, spec.node_crash, run_duration_ms=spec.duration_ms)

    proactive = spec.mode == "proactive"
    engine = DiagnosticsEngine(bus, spec.detector_config, enabled=proactive)
    watch = spec.watch or derive_watch(spec)
    if proactive:
        for entry in watch:
            engine.watch(entry["topic"], nominal_period=round(1000 / entry["rate_hz"]))

    truth = ground_truth(spec)
    review_dir = Path(out_dir) if out_dir is not None else None
    review_path = None
    if review_dir is not None:
        review_path = write_review_fixture(spec, review_dir)

    if kb is None:
        counter = iter(range(1, 1 << 30))
        kb = KnowledgeBase(clock=lambda: float(next(counter)))

    watch_rate = watch[0]["rate_hz"] if watch else None
    context_vars = {
        "lidar_topic": _sensor_topic(spec, "lidar"),
        "image_topic": _sensor_topic(spec, "camera"),
        "review_path": review_path or "injector_node.py",
    }
    if proactive and watch_rate:
        # The nominal rate is detector-derived knowledge; the queried-only
        # baseline has no monitors, so it never sees it.
        context_vars["nominal_period"] = round(1000 / watch_rate)
    agent = DebugAgent(bus, kb=kb, engine=engine,
                       backend=backend or (proactive_backend() if proactive
                                           else queried_backend()),
                       workspace_root=str(review_dir) if review_dir else None,
                       context_vars=context_vars)
    session = agent.start_session(expertise)

    pending: list = []
    engine.listeners.append(pending.append)

    report: Optional[DebugReport] = None
    slice_ms = 200
    elapsed = 0
    while elapsed < spec.duration_ms:
        step = min(slice_ms, spec.duration_ms - elapsed)
        bus.advance(step)
        elapsed += step
        if proactive and report is None and pending:
            event = pending[0]
            agent.notify(session, event)
            report = agent.run_react(
                session, goal=f"diagnose {event.category} on {event.topic} "
                              f"from node {event.suspected_node}", event=event)

    if not proactive:
        probe_word = "lidar" if truth.true_topic is None or "scan" in (truth.true_topic or "") \
            else "image"
        report = agent.run_react(session, goal=f"Is there any error in {probe_word} data",
                                 rag_first=False)
        if report.identified_error_type is None and _mentions_anomaly(report):
            report = agent.run_react(
                session, goal=f"What is the anomaly in the {probe_word} data",
                rag_first=False)
    elif report is None:
        # No event fired; still produce a (failed) report for scoring.
        report = agent.run_react(session, goal="diagnose the reported fault")

    onset = _onset_ms(spec, injector)
    detected, latency = score_detection(engine.events, report, truth, onset, spec.mode)
    result = RunResult(scenario=spec.name, rep=rep, mode=spec.mode, truth=truth,
                       report=report, events=engine.event_rows(),
                       ledger=injector.ledger_rows() if injector else [],
                       trace_digest=bus.trace_digest(), onset_ms=onset,
                       detected=detected, detection_latency_ms=latency)
    if out_dir is not None:
        rep_dir = persist_run(result, Path(out_dir))
        bus.export_trace(rep_dir / "trace.jsonl")
    return result


def _mentions_anomaly(report: DebugReport) -> bool:
    return bool(re.search(r"anomal|error|issue", report.narrative, re.I)) \
        and bool(report.hypotheses)


def _sensor_topic(spec: ScenarioSpec, kind: str) -> str:
    for src in spec.workload.sources:
        if src.kind == kind:
            if spec.fault is not None and spec.fault.input_topic == src.topic:
                return spec.fault.output_topic
            return src.topic
    return "/scan_out" if kind == "lidar" else "/camera/image_out"


def _onset_ms(spec: ScenarioSpec, injector) -> Optional[int]:
    if spec.node_crash is not None:
        return spec.node_crash.at_time_ms
    return injector.onset_time() if injector is not None else None


def persist_run(result: RunResult, out_dir: Path) -> Path:
    rep_dir = out_dir / f"rep_{result.rep}"
    rep_dir.mkdir(parents=True, exist_ok=True)
    with open(rep_dir / "events.jsonl", "w") as fh:
        for row in result.events:
            fh.write(json.dumps(row) + "\n")
    with open(rep_dir / "ledger.jsonl", "w") as fh:
        for row in result.ledger:
            fh.write(json.dumps(row) + "\n")
    (rep_dir / "report.json").write_text(json.dumps(result.report.to_dict(), indent=2))
    (rep_dir / "truth.json").write_text(json.dumps(result.truth.to_dict(), indent=2))
    (rep_dir / "meta.json").write_text(json.dumps(result.to_meta(), indent=2))
    return rep_dir


# ---------------------------------------------------------------------------
# scoring


def score_detection(events, report: Optional[DebugReport], truth: GroundTruth,
                    onset: Optional[int], mode: str
                    ) -> tuple[bool, Optional[int]]:
    """Proactive: an event must match category+topic. Queried: the report must."""
    if mode == "proactive":
        for ev in events:
            category = ev["category"] if isinstance(ev, dict) else ev.category
            topic = ev["topic"] if isinstance(ev, dict) else ev.topic
            t = ev["time"] if isinstance(ev, dict) else ev.time
            if category == truth.true_category and (
                    truth.true_topic is None or topic == truth.true_topic):
                latency = (t - onset) if onset is not None else None
                return True, latency
        return False, None
    if report is None:
        return False, None
    ok = report.identified_error_type == truth.true_category
    if truth.true_topic is not None:
        ok = ok and report.identified_topic is not None and \
            normalize_topic(report.identified_topic) == normalize_topic(truth.true_topic)
    return ok, None


def score_control(events) -> bool:
    """Fault-free control runs pass exactly when no event fired."""
    return len(events) == 0


def score_boolean_criteria(report: DebugReport, truth: GroundTruth
                           ) -> tuple[bool, Optional[bool], bool]:
    a = (report.identified_node is not None
         and normalize_node(report.identified_node) == normalize_node(truth.true_node))
    if truth.true_topic is None:
        b: Optional[bool] = None
    else:
        b = (report.identified_topic is not None
             and normalize_topic(report.identified_topic) == normalize_topic(truth.true_topic))
    c = report.identified_error_type == truth.true_category
    return a, b, c


@dataclass
class Guideline:
    node: str
    topic: Optional[str]
    category: str
    text: str


def build_guideline(truth: GroundTruth) -> Guideline:
    lines = [f"The relevant node is recognised to be {truth.true_node}."]
    if truth.true_topic is not None:
        lines.append(f"The relevant topic is recognised to be {truth.true_topic}.")
    lines.append(f"The error type is identified as {truth.true_category}.")
    lines.append("Bonus points if the issue is correctly identified as "
                 "intentional fault injection.")
    return Guideline(node=truth.true_node, topic=truth.true_topic,
                     category=truth.true_category, text="\n".join(lines))


@dataclass
class RubricScore:
    A: bool
    B: Optional[bool]
    C: bool
    D: int
    E: int
    F: int
    G: int
    H: int
    judge_id: str = "deterministic"

    def to_dict(self) -> dict:
        return {"A": self.A, "B": self.B, "C": self.C, "D": self.D, "E": self.E,
                "F": self.F, "G": self.G, "H": self.H, "judge_id": self.judge_id}


def deterministic_judge(report: DebugReport, guideline: Guideline) -> dict:
    """Structural rubric for D-H; a pure function of (report, guideline)."""
    hypotheses = [h for h in report.hypotheses if h]
    d = {0: 0, 1: 5, 2: 8, 3: 9}.get(len(set(hypotheses)), 10)

    diags = report.diagnostics_run
    if not diags:
        e = 0
        f = 0
    else:
        relevant = _RELEVANT_TOOLS.get(guideline.category, set())
        used = {d_["tool"] for d_ in diags}
        hits = len(used & relevant)
        e = 4 if hits == 0 else (8 if hits == 1 else 10)
        topic_token = (guideline.topic or "").strip("/")
        linked = any(
            (topic_token and topic_token in d_["summary"]) or
            (guideline.category in d_["summary"].lower())
            for d_ in diags)
        f = 8 if (hypotheses and linked) else (3 if hypotheses else 0)

    recs = [r for r in report.recommendations if r]
    if not recs:
        g = 0
    elif all(r.split()[0].lower() in _ACTION_VERBS for r in recs):
        g = 10 if len(recs) >= 3 else 8
    else:
        g = 4

    has_marker = any(f_.get("kind") == "injection-marker" for f_ in report.code_findings)
    h = 9 if has_marker else 0
    return {"D": d, "E": e, "F": f, "G": g, "H": h}


def judge_report(report: DebugReport, guideline: Guideline,
                 judge: str = "deterministic",
                 judge_url: Optional[str] = None) -> dict:
    """D-H scores plus judge id; external judge falls back when unreachable."""
    if judge == "external":
        try:
            import httpx
            resp = httpx.post(judge_url, json={
                "report": report.to_dict(),
                "criteria": list("DEFGH"),
                "guideline": guideline.text}, timeout=30.0)
            resp.raise_for_status()
            doc = resp.json()
            scores = {k: int(doc[k]) for k in "DEFGH"}
            for k, v in scores.items():
                if not 0 <= v <= 10:
                    raise ValueError(f"judge score {k}={v} out of range")
            return {**scores, "judge_id": f"external:{judge_url}"}
        except Exception:
            scores = deterministic_judge(report, guideline)
            return {**scores, "judge_id": "deterministic(fallback)"}
    scores = deterministic_judge(report, guideline)
    return {**scores, "judge_id": "deterministic"}


def score_run(result: RunResult, judge: str = "deterministic",
              judge_url: Optional[str] = None) -> RubricScore:
    a, b, c = score_boolean_criteria(result.report, result.truth)
    guideline = build_guideline(result.truth)
    dh = judge_report(result.report, guideline, judge=judge, judge_url=judge_url)
    return RubricScore(A=a, B=b, C=c, D=dh["D"], E=dh["E"], F=dh["F"],
                       G=dh["G"], H=dh["H"], judge_id=dh["judge_id"])


# ---------------------------------------------------------------------------
# aggregation


def aggregate(scored: dict) -> dict:
    """``scored``: {category: {"detection": [bool...], "scores": [RubricScore...],
    "detection_queried": optional [bool...]}}.

    ``detection`` carries the proactive runs; queried-mode runs, when
    present, land in their own column, mirroring the two baseline-vs-ours
    detection columns of the evaluation table. Booleans render as 0/100
    percentages, 0-10 scores as x10; row and column averages are
    recomputed from the cells they summarize.
    """
    table: dict = {"categories": {}, "column_averages": {}}
    for category, entry in scored.items():
        detections = entry["detection"]
        queried = entry.get("detection_queried")
        scores = entry["scores"]
        row: dict = {}
        row["detection_queried"] = (100.0 * sum(queried) / len(queried)) \
            if queried else None
        row["detection"] = 100.0 * sum(detections) / len(detections) if detections else 0.0
        for crit in CRITERIA:
            values = []
            for s in scores:
                v = getattr(s, crit)
                if v is None:
                    continue
                values.append((100.0 if v else 0.0) if isinstance(v, bool) else v * 10.0)
            row[crit] = round(sum(values) / len(values), 1) if values else None
        present = [row[c] for c in CRITERIA if row[c] is not None]
        row["average"] = round(sum(present) / len(present), 1) if present else None
        table["categories"][category] = row

    for column in ("detection_queried", "detection") + CRITERIA + ("average",):
        cells = [row[column] for row in table["categories"].values()
                 if row.get(column) is not None]
        table["column_averages"][column] = round(sum(cells) / len(cells), 1) \
            if cells else None
    return table


def verify_aggregate(table: dict) -> bool:
    """Column averages must be exactly recomputable from their cells."""
    for column, value in table["column_averages"].items():
        cells = [row[column] for row in table["categories"].values()
                 if row.get(column) is not None]
        expect = round(sum(cells) / len(cells), 1) if cells else None
        if expect != value:
            return False
    return True


def render_table(table: dict) -> str:
    headers = ["Category", "Queried", "Proactive"] + list(CRITERIA) + ["Avg"]
    rows = [headers]
    for category, row in table["categories"].items():
        cells = [category, _fmt(row.get("detection_queried")), _fmt(row["detection"])]
        cells += [_fmt(row[c]) for c in CRITERIA]
        cells.append(_fmt(row["average"]))
        rows.append(cells)
    avg = table["column_averages"]
    rows.append(["Average", _fmt(avg.get("detection_queried")), _fmt(avg["detection"])]
                + [_fmt(avg[c]) for c in CRITERIA] + [_fmt(avg["average"])])
    widths = [max(len(r[i]) for r in rows) for i in range(len(headers))]
    lines = []
    for i, r in enumerate(rows):
        lines.append("  ".join(cell.rjust(w) for cell, w in zip(r, widths)))
        if i == 0 or i == len(rows) - 2:
            lines.append("-" * (sum(widths) + 2 * (len(widths) - 1)))
    return "\n".join(lines)


def _fmt(value) -> str:
    if value is None:
        return "—"
    return f"{value:.0f}%"


def load_scenario_spec(path: str, require_fault: bool = True) -> ScenarioSpec:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: expected a mapping")
    return ScenarioSpec.from_dict(doc, require_fault=require_fault)


def derive_watch(spec: ScenarioSpec) -> list:
    """Fallback watch list: each consumer topic at its chain's source rate."""
    watch = []
    for consumer in spec.workload.consumers:
        topic = consumer.topic
        src_topic = topic
        if spec.fault is not None and topic == spec.fault.output_topic:
            src_topic = spec.fault.input_topic
        src = spec.workload.source_for_topic(src_topic)
        if src is not None:
            watch.append({"topic": topic, "rate_hz": src.rate_hz})
    return watch
