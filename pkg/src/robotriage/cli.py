"""Command line interface: run scenarios, score reports, render tables, serve.

Service configuration comes from flags with environment-variable
fallbacks (flags win): ROBOTRIAGE_LISTEN, ROBOTRIAGE_SCENARIO,
ROBOTRIAGE_DETECTOR_CONFIG, ROBOTRIAGE_KB, ROBOTRIAGE_WORKSPACE_ROOT,
ROBOTRIAGE_BACKEND_URL, ROBOTRIAGE_SESSION_STORE.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import yaml

from .agent import DebugReport
from .diagnostics import DetectorConfig
from .evaluate import (CATEGORIES_7, GroundTruth, RubricScore, RunResult,
                       aggregate, default_scenario, load_scenario_spec,
                       render_table, run_scenario, score_boolean_criteria,
                       build_guideline, judge_report, verify_aggregate)


def _env_default(flag_value, env_name):
    return flag_value if flag_value is not None else os.environ.get(env_name)


def cmd_run(args) -> int:
    out = Path(args.out)
    if args.scenario:
        specs = [load_scenario_spec(args.scenario)]
    elif args.builtin == "all":
        specs = [default_scenario(c) for c in CATEGORIES_7]
    else:
        specs = [default_scenario(args.builtin)]
    for spec in specs:
        if args.mode:
            spec.mode = "queried" if args.mode.startswith("queried") else "proactive"
        if args.reps:
            spec.repetitions = args.reps
        scenario_dir = out / spec.name / spec.mode
        scenario_dir.mkdir(parents=True, exist_ok=True)
        (scenario_dir / "scenario.yaml").write_text(yaml.safe_dump(spec.to_dict()))
        for rep in range(spec.repetitions):
            result = run_scenario(spec, rep=rep, out_dir=scenario_dir)
            status = "detected" if result.detected else "missed"
            print(f"{spec.name}[{spec.mode}] rep {rep}: {status} "
                  f"(latency {result.detection_latency_ms} ms)")
    return 0


def _iter_rep_dirs(root: Path):
    for meta_path in sorted(root.glob("**/rep_*/meta.json")):
        yield meta_path.parent


def cmd_score(args) -> int:
    root = Path(args.input)
    grouped: dict = {}
    for rep_dir in _iter_rep_dirs(root):
        meta = json.loads((rep_dir / "meta.json").read_text())
        report = DebugReport.from_dict(json.loads((rep_dir / "report.json").read_text()))
        truth = GroundTruth(**json.loads((rep_dir / "truth.json").read_text()))
        a, b, c = score_boolean_criteria(report, truth)
        dh = judge_report(report, build_guideline(truth),
                          judge=args.judge, judge_url=args.judge_url)
        score = RubricScore(A=a, B=b, C=c, D=dh["D"], E=dh["E"], F=dh["F"],
                            G=dh["G"], H=dh["H"], judge_id=dh["judge_id"])
        key = (meta["scenario"], meta["mode"])
        grouped.setdefault(key, []).append(
            {"rep": meta["rep"], "detected": meta["detected"],
             "detection_latency_ms": meta["detection_latency_ms"],
             "rubric": score.to_dict()})
    for (scenario, mode), reps in grouped.items():
        scores_path = root / scenario / mode / "scores.json"
        scores_path.parent.mkdir(parents=True, exist_ok=True)
        scores_path.write_text(json.dumps(
            {"scenario": scenario, "mode": mode, "reps": reps}, indent=2))
        print(f"scored {scenario}[{mode}]: {len(reps)} repetitions -> {scores_path}")
    if not grouped:
        print("no runs found under", root, file=sys.stderr)
        return 1
    return 0


def cmd_report(args) -> int:
    root = Path(args.input)
    scored: dict = {}
    for scores_path in sorted(root.glob("**/scores.json")):
        doc = json.loads(scores_path.read_text())
        entry = scored.setdefault(doc["scenario"],
                                  {"detection": [], "scores": [],
                                   "detection_queried": []})
        if doc["mode"] == "queried":
            # Baseline runs contribute only their detection column.
            entry["detection_queried"].extend(bool(r["detected"]) for r in doc["reps"])
            continue
        for rep in doc["reps"]:
            entry["detection"].append(bool(rep["detected"]))
            rubric = dict(rep["rubric"])
            rubric.pop("judge_id", None)
            entry["scores"].append(RubricScore(**rubric))
    if not scored:
        print("no scores.json found under", root, file=sys.stderr)
        return 1
    table = aggregate(scored)
    assert verify_aggregate(table)
    if args.format == "json":
        print(json.dumps(table, indent=2))
    else:
        print(render_table(table))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .backends import RemoteBackend
    from .service import ServiceRuntime, create_app

    listen = _env_default(args.listen, "ROBOTRIAGE_LISTEN") or "127.0.0.1:8080"
    scenario_path = _env_default(args.scenario, "ROBOTRIAGE_SCENARIO")
    detector_path = _env_default(args.detector_config, "ROBOTRIAGE_DETECTOR_CONFIG")
    kb_path = _env_default(args.kb, "ROBOTRIAGE_KB")
    workspace = _env_default(args.workspace_root, "ROBOTRIAGE_WORKSPACE_ROOT")
    backend_url = _env_default(args.backend_url, "ROBOTRIAGE_BACKEND_URL")
    store = _env_default(args.session_store, "ROBOTRIAGE_SESSION_STORE")

    spec = load_scenario_spec(scenario_path, require_fault=False) \
        if scenario_path else None
    detector = DetectorConfig.from_yaml(Path(detector_path).read_text()) \
        if detector_path else None
    backend = RemoteBackend(backend_url) if backend_url else None
    runtime = ServiceRuntime(scenario=spec, detector_config=detector, kb_path=kb_path,
                             workspace_root=workspace, backend=backend,
                             session_store=store)
    app = create_app(runtime, frontend_dir=args.frontend, pace_ms_per_s=args.pace)
    host, _, port = listen.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8080))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robotriage")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run fault scenarios and persist outputs")
    group = p_run.add_mutually_exclusive_group(required=True)
    group.add_argument("--scenario", help="scenario YAML file")
    group.add_argument("--builtin", choices=list(CATEGORIES_7) + ["all"],
                       help="built-in scenario category")
    p_run.add_argument("--mode", choices=["proactive", "queried"], default=None)
    p_run.add_argument("--reps", type=int, default=None)
    p_run.add_argument("--out", required=True)
    p_run.set_defaults(func=cmd_run)

    p_score = sub.add_parser("score", help="score persisted debug reports")
    p_score.add_argument("--in", dest="input", required=True)
    p_score.add_argument("--judge", choices=["deterministic", "external"],
                         default="deterministic")
    p_score.add_argument("--judge-url", default=None)
    p_score.set_defaults(func=cmd_score)

    p_report = sub.add_parser("report", help="aggregate scores into a table")
    p_report.add_argument("--in", dest="input", required=True)
    p_report.add_argument("--format", choices=["json", "table"], default="table")
    p_report.set_defaults(func=cmd_report)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--listen", default=None, help="host:port")
    p_serve.add_argument("--scenario", default=None)
    p_serve.add_argument("--detector-config", default=None)
    p_serve.add_argument("--kb", default=None)
    p_serve.add_argument("--workspace-root", default=None)
    p_serve.add_argument("--backend-url", default=None)
    p_serve.add_argument("--session-store", default=None)
    p_serve.add_argument("--frontend", default="frontend/dist")
    p_serve.add_argument("--pace", type=int, default=1000,
                         help="simulated ms per wall-clock second (0 = manual)")
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
