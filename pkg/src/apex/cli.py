"""Command line entry points: serve, replay, synth, bench."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import (
    config_for_recording,
    load_truth,
    replay,
    save_truth,
    synth_session,
)
from .perception import load_recording, save_recording
from .sop import bundled_atlas, load_atlas_dir
from .wire import canonical_json, pretty_json


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    from .session import SessionStore

    atlas = load_atlas_dir(args.atlas_dir) if args.atlas_dir else bundled_atlas()
    if args.backend == "remote":
        from .analysis import RemoteQueryBackend
        from .perception import RemotePerceptionBackend
        from .remote import RemoteClient
        from .tracker import RemotePredictionBackend

        client = RemoteClient.from_env()

        def backend_factory(config):
            steps = [s.to_dict() for s in config.experiment_plan.steps]
            return {
                "perception_backend": RemotePerceptionBackend(client),
                "prediction_backend": RemotePredictionBackend(client, steps),
                "query_backend": RemoteQueryBackend(client),
            }

        store = SessionStore(atlas=atlas, backend_factory=backend_factory, log_dir=args.log_dir)
    else:
        store = SessionStore(atlas=atlas, log_dir=args.log_dir)
    uvicorn.run(create_app(store), host=args.host, port=args.port, log_level="info")
    return 0


def _load_config(path: str | None, recording):
    if path is None:
        return config_for_recording(recording)
    from .service import config_from_dict
    from .session import MODE_REPLAY

    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    obj.setdefault("mode", MODE_REPLAY)
    return config_from_dict(obj, bundled_atlas())


def _cmd_replay(args) -> int:
    recording = load_recording(args.recording)
    truth = load_truth(args.truth)
    config = _load_config(args.config, recording)
    metrics, log_doc = replay(recording, truth, config, auto_answer=args.answer)
    print(pretty_json(metrics.to_dict()))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.json").write_text(canonical_json(metrics.to_dict()) + "\n")
        (out / "session_log.json").write_text(log_doc)
        print(f"wrote {out / 'metrics.json'} and {out / 'session_log.json'}")
    return 0


def _cmd_synth(args) -> int:
    atlas = load_atlas_dir(args.atlas_dir) if args.atlas_dir else bundled_atlas()
    doc = atlas.lookup(args.sop)
    recording, truth, _ = synth_session(
        doc, frames_per_step=args.frames_per_step, flip_prob=args.flip, seed=args.seed
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rec_path = out / f"{args.sop}_seed{args.seed}.rec"
    truth_path = out / f"{args.sop}_seed{args.seed}.truth.json"
    save_recording(rec_path, recording)
    save_truth(truth_path, truth)
    print(f"wrote {rec_path} ({len(recording)} frames) and {truth_path}")
    return 0


def _check_expectations(name: str, metrics, expect: dict) -> list[str]:
    failures = []
    if "min_step_accuracy" in expect and metrics.step_accuracy < expect["min_step_accuracy"]:
        failures.append(
            f"{name}: step_accuracy {metrics.step_accuracy:.4f} < {expect['min_step_accuracy']}"
        )
    if "max_hitl" in expect and metrics.hitl_count > expect["max_hitl"]:
        failures.append(f"{name}: hitl_count {metrics.hitl_count} > {expect['max_hitl']}")
    if "alerts" in expect and metrics.alerts != expect["alerts"]:
        failures.append(f"{name}: alerts {metrics.alerts} != {expect['alerts']}")
    return failures


def _cmd_bench(args) -> int:
    suite_dir = Path(args.suite)
    suite = json.loads((suite_dir / "suite.json").read_text(encoding="utf-8"))
    rows = []
    failures: list[str] = []
    for case in suite["cases"]:
        recording = load_recording(suite_dir / case["recording"])
        truth = load_truth(suite_dir / case["truth"])
        config = _load_config(
            str(suite_dir / case["config"]) if case.get("config") else None, recording
        )
        metrics, _ = replay(
            recording, truth, config, auto_answer=case.get("answer", "oracle")
        )
        rows.append((case["name"], metrics))
        failures.extend(_check_expectations(case["name"], metrics, case.get("expect", {})))
    width = max(len(name) for name, _ in rows) if rows else 4
    print(f"{'case'.ljust(width)}  frames  step_acc  hitl  alerts")
    for name, m in rows:
        print(
            f"{name.ljust(width)}  {m.frames:6d}  {m.step_accuracy:8.4f}"
            f"  {m.hitl_count:4d}  {m.alerts:6d}"
        )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        payload = {name: m.to_dict() for name, m in rows}
        (out / "bench.json").write_text(canonical_json(payload) + "\n")
    for failure in failures:
        print(f"FAIL {failure}", file=sys.stderr)
    return 1 if failures else 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="apex")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the session HTTP service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--atlas-dir", default=None)
    p.add_argument("--backend", choices=["scripted", "remote"], default="scripted")
    p.add_argument("--log-dir", default=None, help="append per-session event logs here")
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("replay", help="replay a recording against ground truth")
    p.add_argument("--recording", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--answer", default="oracle", help="oracle | refuse | fixed:K")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_replay)

    p = sub.add_parser("synth", help="generate a synthetic recording + truth")
    p.add_argument("--sop", required=True)
    p.add_argument("--frames-per-step", type=int, default=6)
    p.add_argument("--flip", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--atlas-dir", default=None)
    p.add_argument("--out", default="synth_out")
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("bench", help="run a suite of replays and check thresholds")
    p.add_argument("--suite", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_bench)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
