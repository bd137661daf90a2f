#!/usr/bin/env python3
"""Regenerate the committed replay fixtures under tests/fixtures/.

The golden recording walks the 8-step etch procedure noise-free with plan
(1, 3, 0.8): predictions at every frame, a vote every third frame, each
vote advancing exactly one step. Ground truth is the accepted-step trace
(0 marks frames before the first confirmation), so a correct engine
scores step accuracy 1.0 with zero clarifications.

The error-scenario recording reaches step 4 with wrong panel readings
(100 W / 10 s against the 50 W / 30 s setpoints), then repeats step 4
with corrected readings.
"""

from __future__ import annotations

import sys
from pathlib import Path

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"

from apex.harness import GroundTruth, save_truth
from apex.perception import (
    ContextFrame,
    EquipmentObservation,
    RawFrame,
    Reading,
    Recording,
    RecordingHeader,
    save_recording,
)
from apex.planner import FallbackReasoningBackend, make_experiment_plan, make_tracking_plan
from apex.sop import bundled_atlas

ACTIONS = {
    1: "selecting Manual then Vent on the control screen",
    2: "placing the wafer in the chamber with tweezers",
    3: "starting the vacuum pump-down",
    4: "entering etch time and RF power on the panel",
    5: "pressing Start and watching the indicators",
    6: "venting the chamber back to atmosphere",
    7: "retrieving the wafer with tweezers",
    8: "closing the door and pumping down",
}


def step_readings(step: int, wrong: bool = False) -> tuple[Reading, ...]:
    if step == 4:
        if wrong:
            return (Reading("time", 10, "s"), Reading("rf_power", 100, "W"))
        return (Reading("time", 30, "s"), Reading("rf_power", 50, "W"))
    if step == 5:
        return (Reading("gas_on", "Green On"), Reading("rf_power_on", "Green On"))
    return ()


def make_frames(doc, n_frames: int, final_step: int, wrong_windows: set[int]):
    frames = []
    truth_steps = []
    truth_equipment = []
    for j in range(n_frames):
        step = min(final_step, j // 3 + 1)
        wrong = j in wrong_windows
        spec_step = doc.step(step)
        readings = step_readings(step, wrong)
        equipment = tuple(
            EquipmentObservation(
                name=name,
                position="on the bench" if "tweezers" in name.lower() else "in front of the operator",
                readings=readings if k == 0 else (),
            )
            for k, name in enumerate(spec_step.expected_equipment)
        )
        context = ContextFrame(
            frame_index=j,
            timestamp=j * 100,
            equipment=equipment,
            environment="cleanroom etch bay, lights on",
            action=ACTIONS[step],
        )
        frames.append(
            RawFrame(
                frame_index=j,
                timestamp=j * 100,
                context=context,
                predicted=({"step": step, "confidence": 0.9},),
            )
        )
        truth_steps.append(min(final_step, (j + 1) // 3))
        truth_equipment.append(spec_step.expected_equipment)
    return frames, truth_steps, truth_equipment


def build(doc, name: str, n_frames: int, final_step: int, wrong_windows: set[int]):
    backend = FallbackReasoningBackend()
    plan = make_tracking_plan(doc, backend, backend.config.defaults)
    frames, truth_steps, truth_equipment = make_frames(
        doc, n_frames, final_step, wrong_windows
    )
    recording = Recording(
        header=RecordingHeader(
            sop_id=doc.id,
            experiment_plan=make_experiment_plan(doc, backend),
            tracking_plan=plan,
        ),
        frames=tuple(frames),
    )
    truth = GroundTruth(steps=tuple(truth_steps), equipment=tuple(truth_equipment))
    save_recording(FIXTURES / f"{name}.rec", recording)
    save_truth(FIXTURES / f"{name}.truth.json", truth)
    print(f"wrote {name}: {n_frames} frames")


def main() -> int:
    doc = bundled_atlas().lookup("rie")
    build(doc, "rie_golden", n_frames=24, final_step=8, wrong_windows=set())
    # wrong readings while step 4 is first confirmed (frames 9-11), fixed after
    build(doc, "rie_error_correction", n_frames=15, final_step=4, wrong_windows={9, 10, 11})
    return 0


if __name__ == "__main__":
    sys.exit(main())
