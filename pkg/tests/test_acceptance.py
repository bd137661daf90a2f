"""Acceptance gate: one test per release criterion, at stated tolerances.

Run with ``pytest -s tests/test_acceptance.py`` to see one pass line per
criterion.
"""

from __future__ import annotations

import json
import random
import time

from apex.harness import (
    load_truth,
    raw_accuracy,
    replay,
    summarize_scores,
    synth_session,
)
from apex.perception import load_recording
from apex.planner import FallbackReasoningBackend, PlanDefaults, make_experiment_plan, make_tracking_plan
from apex.session import fold_events
from apex.tracker import Candidate, FramePrediction, TrackerMemory, aggregate_votes
from oracles import brute_force_votes, reference_mean_sem, simulate_session

RIE_EQUIPMENT = [
    "ANATECH USA RIE-19 (Reactive Ion Etcher)",
    "Wafer (sample)",
    "Chamber door and chamber",
    "Control system/User interface (for selecting Manual, Vent, System Overview, Start Vacuum)",
    "Screen/Display (for viewing indicators and etching time)",
    "Vacuum pump/system",
    "RF power supply",
    "Pressure gauge/sensor for measuring mTorr",
    "Time/Clock (for 30s etching time)",
    "Wafer tweezers",
    'Process Gas/Gases (implied by "Gas On" indicator)',
    "Safety gloves (e.g., Nitrile gloves)",
    "Safety goggles",
]

SPIN_EQUIPMENT = [
    "Spin coater",
    "Spin coater controller/interface",
    "Spinner chuck",
    "Hot plate or oven (for baking)",
    "Timer/Stopwatch",
    "Wafer (substrate)",
    "SU-8 TF 6002 photoresist",
    "Dispensing tool (e.g., pipette, dropper syringe) for photoresist",
    "Wafer tweezers (for handling)",
    "Safety goggles",
    "Nitrile gloves",
]


def report(line: str) -> None:
    print(f"\n[PASS] {line}")


def test_voting_oracle_equivalence():
    """10,000 random memories: winners exact, confidences within 1e-9, < 10 s."""
    rng = random.Random(2026)
    grid = [round(0.05 * k, 2) for k in range(21)]
    started = time.perf_counter()
    for _ in range(10_000):
        n_entries = rng.randint(1, 7)
        n_steps = rng.randint(1, 12)
        ballots = [
            [(rng.randint(1, n_steps), rng.choice(grid)) for _ in range(rng.randint(1, 3))]
            for _ in range(n_entries)
        ]
        memory = TrackerMemory(n_entries)
        for i, ballot in enumerate(ballots):
            memory.push(
                _frame(i), FramePrediction(i, tuple(Candidate(s, c) for s, c in ballot))
            )
        confirmed = aggregate_votes(memory)
        expected = brute_force_votes(ballots)
        got = [
            (r.step, r.aggregated_confidence)
            for r in (confirmed.top, confirmed.second, confirmed.third)
            if r is not None
        ]
        assert len(got) == len(expected)
        for (g_step, g_conf), (e_step, e_conf) in zip(got, expected):
            assert g_step == e_step
            assert abs(g_conf - e_conf) <= 1e-9
    elapsed = time.perf_counter() - started
    assert elapsed < 10.0
    report(f"voting oracle: 10,000 memories equivalent in {elapsed:.2f}s")


def _frame(i: int):
    from apex.perception import ContextFrame

    return ContextFrame(frame_index=i, timestamp=i)


def test_golden_replay(fixtures_dir):
    """Noise-free 8-step run: 8 confirmations in order, accuracy 1.0, no HITL, < 1 s."""
    recording = load_recording(fixtures_dir / "rie_golden.rec")
    truth = load_truth(fixtures_dir / "rie_golden.truth.json")
    started = time.perf_counter()
    metrics, log_doc = replay(recording, truth)
    elapsed = time.perf_counter() - started
    events = json.loads(log_doc)["events"]
    confirmed = [e["data"]["top"]["step"] for e in events if e["kind"] == "StepConfirmed"]
    assert confirmed == [1, 2, 3, 4, 5, 6, 7, 8]
    assert metrics.step_accuracy == 1.0
    assert metrics.hitl_count == 0
    assert elapsed < 1.0
    report(
        f"golden replay: 8 steps in order, accuracy 1.0, hitl 0, {elapsed*1000:.0f}ms"
    )


def test_error_correction_scenario(fixtures_dir):
    """Wrong 100 W / 10 s entries at step 4: exactly two named alerts, then none."""
    recording = load_recording(fixtures_dir / "rie_error_correction.rec")
    truth = load_truth(fixtures_dir / "rie_error_correction.truth.json")
    metrics, log_doc = replay(recording, truth)
    events = json.loads(log_doc)["events"]
    alerts = [e for e in events if e["kind"] == "AlertRaised"]
    assert len(alerts) == 2
    assert {a["data"]["parameter"] for a in alerts} == {"time", "rf_power"}
    assert all(a["data"]["kind"] == "ParameterMismatch" for a in alerts)
    # both alerts belong to the first step-4 confirmation; the corrected
    # confirmation afterwards raises none
    confirm_seqs = [e["seq"] for e in events if e["kind"] == "StepConfirmed"]
    last_confirm = max(confirm_seqs)
    assert all(a["seq"] < last_confirm for a in alerts)
    assert metrics.alerts == 2
    report("error correction: 2 mismatch alerts (time, rf_power), 0 after fix")


def test_hitl_oracle_equivalence(rie_doc):
    """1,000 synthetic sessions: query count and frame positions match brute force."""
    flips = (0.0, 0.2, 0.4)
    total_queries = 0
    started = time.perf_counter()
    for seed in range(1000):
        flip = flips[seed % 3]
        recording, truth, table = synth_session(
            rie_doc, frames_per_step=6, flip_prob=flip, seed=seed
        )
        plan = recording.header.tracking_plan
        metrics, log_doc = replay(recording, truth, auto_answer="oracle")
        events = json.loads(log_doc)["events"]
        engine_queries = [
            e["data"]["frame_index"]
            for e in events
            if e["kind"] == "ClarificationRequested"
        ]
        oracle_queries, _ = simulate_session(
            table,
            truth.steps,
            plan.memory_update_interval,
            plan.prediction_interval,
            plan.confidence_threshold,
        )
        assert engine_queries == oracle_queries, f"seed {seed} flip {flip}"
        assert metrics.hitl_count == len(oracle_queries)
        total_queries += len(oracle_queries)
    elapsed = time.perf_counter() - started
    report(
        f"hitl oracle: 1,000 sessions, {total_queries} queries at matching positions "
        f"({elapsed:.1f}s)"
    )


def test_vote_smoothing_beats_raw_accuracy(rie_doc):
    """flip 0.3, 8 steps, 60 frames/step, 100 seeds: smoothed beats raw, < 60 s."""
    started = time.perf_counter()
    voted = []
    raw = []
    for seed in range(100):
        recording, truth, table = synth_session(
            rie_doc, frames_per_step=60, flip_prob=0.3, seed=seed
        )
        metrics, _ = replay(recording, truth, auto_answer="oracle")
        voted.append(metrics.step_accuracy)
        raw.append(raw_accuracy(table, truth))
    elapsed = time.perf_counter() - started
    mean_voted = sum(voted) / len(voted)
    mean_raw = sum(raw) / len(raw)
    assert mean_voted > mean_raw
    assert elapsed < 60.0
    report(
        f"smoothing: voted accuracy {mean_voted:.3f} > raw {mean_raw:.3f} "
        f"over 100 seeds ({elapsed:.1f}s)"
    )


def test_determinism_and_event_roundtrip(fixtures_dir):
    """Byte-identical repeat replays; fold of exported stream equals derived state."""
    for name in ("rie_golden", "rie_error_correction"):
        recording = load_recording(fixtures_dir / f"{name}.rec")
        truth = load_truth(fixtures_dir / f"{name}.truth.json")
        metrics_a, log_a = replay(recording, truth)
        metrics_b, log_b = replay(recording, truth)
        assert log_a == log_b
        assert metrics_a == metrics_b
        exported = json.loads(log_a)
        refolded = fold_events(exported["events"])
        confirmed = [e for e in exported["events"] if e["kind"] == "StepConfirmed"]
        assert refolded.last_step == confirmed[-1]["data"]["top"]["step"]
        assert refolded.closed
        assert refolded.records == tuple(
            (r["seq"], r["step"], r["source"]) for r in exported["records"]
        )
    report("determinism: repeat replays byte-identical; event fold reproduces state")


def test_plan_fidelity(atlas):
    """Bundled procedures parse to 8 and 6 steps with full inventories and plans."""
    backend = FallbackReasoningBackend()
    defaults = PlanDefaults(1, 3, 0.7)
    rie = atlas.lookup("rie")
    spin = atlas.lookup("spin_coating")
    assert rie.n_steps == 8
    assert spin.n_steps == 6
    rie_inventory = make_experiment_plan(rie, backend).inventory
    for item in RIE_EQUIPMENT:
        assert item in rie_inventory, item
    spin_inventory = make_experiment_plan(spin, backend).inventory
    for item in SPIN_EQUIPMENT:
        assert item in spin_inventory, item
    rie_plan = make_tracking_plan(rie, backend, defaults)
    assert (
        rie_plan.memory_update_interval,
        rie_plan.prediction_interval,
        rie_plan.confidence_threshold,
    ) == (1, 3, 0.8)
    spin_plan = make_tracking_plan(spin, backend, defaults)
    assert (
        spin_plan.memory_update_interval,
        spin_plan.prediction_interval,
        spin_plan.confidence_threshold,
    ) == (2, 5, 0.6)
    report("plan fidelity: 8+6 steps, full inventories, plans (1,3,0.8) and (2,5,0.6)")


def test_statistics_against_reference():
    """1,000 random score lists: mean and SEM match a textbook formula to 1e-12."""
    rng = random.Random(404)
    for _ in range(1000):
        scores = [rng.randint(1, 5) for _ in range(rng.randint(1, 100))]
        mean, sem = summarize_scores(scores)
        ref_mean, ref_sem = reference_mean_sem(scores)
        assert abs(mean - ref_mean) <= 1e-12
        assert abs(sem - ref_sem) <= 1e-12
    report("statistics: mean/SEM match reference within 1e-12 on 1,000 lists")
