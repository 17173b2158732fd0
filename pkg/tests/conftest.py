"""Shared fixtures: a small planted-prototype corpus on disk.

The corpus generator plants three well-separated feature prototypes (one per
speech type) and paints every frame with matching silence/voicing flags, so
tests can check trained models against known ground truth.
"""

import json

import numpy as np
import pytest

from rhythmvc import featstore

PROTOS = np.zeros((3, 8))
PROTOS[1, 1] = 10.0
PROTOS[2, 2] = -10.0

FRAME_RATE = 50.0


def make_planted_sequence(seed, plan, noise=0.2):
    """Build a FeatureSequence from (type_index, n_frames) runs.

    Type indices follow SpeechType: 0 silence, 1 sonorant, 2 obstruent.
    Flags are painted to match the plan exactly.
    """
    rng = np.random.default_rng(seed)
    frames = []
    flags = []
    for type_index, n in plan:
        frames.append(PROTOS[type_index] + noise * rng.standard_normal((n, PROTOS.shape[1])))
        flags.append(np.tile([type_index == 0, type_index == 1], (n, 1)).astype(bool))
    return featstore.FeatureSequence(
        frame_rate=FRAME_RATE,
        frames=np.concatenate(frames).astype(np.float32),
        flags=np.concatenate(flags),
    )


def cycle_plan(seed, sil_range, obs_range, son_range, cycles=5):
    rng = np.random.default_rng(seed)
    plan = []
    for _ in range(cycles):
        plan.append((0, int(rng.integers(*sil_range))))
        plan.append((2, int(rng.integers(*obs_range))))
        plan.append((1, int(rng.integers(*son_range))))
    return plan


@pytest.fixture(scope="session")
def disk_corpus(tmp_path_factory):
    """Two-speaker corpus on disk: slow speaker A, fast speaker B."""
    root = tmp_path_factory.mktemp("corpus")
    records = []
    texts = [
        "the birch canoe slid on the smooth planks",
        "glue the sheet to the dark blue background",
    ]
    for i in range(4):
        seq = make_planted_sequence(i, cycle_plan(200 + i, (15, 30), (6, 12), (20, 40)))
        path = root / f"A{i}.rnvf"
        featstore.write_rnvf(seq, path)
        records.append(
            featstore.UtteranceRecord(
                id=f"A{i}",
                speaker="A",
                severity="moderate",
                feature_path=str(path),
                transcript=texts[i % 2],
            )
        )
    for i in range(4):
        seq = make_planted_sequence(50 + i, cycle_plan(300 + i, (4, 8), (4, 8), (8, 16)))
        path = root / f"B{i}.rnvf"
        featstore.write_rnvf(seq, path)
        records.append(
            featstore.UtteranceRecord(
                id=f"B{i}",
                speaker="B",
                severity="control",
                feature_path=str(path),
                transcript=texts[i % 2],
            )
        )
    manifest_path = root / "all.jsonl"
    featstore.write_manifest(records, manifest_path)
    with (root / "B.jsonl").open("w", encoding="utf-8") as handle:
        for rec in records[4:]:
            handle.write(
                json.dumps(
                    {
                        "id": rec.id,
                        "speaker": rec.speaker,
                        "severity": rec.severity,
                        "feature_path": rec.feature_path,
                        "transcript": rec.transcript,
                    }
                )
                + "\n"
            )
    return {
        "root": root,
        "manifest": manifest_path,
        "pool_manifest": root / "B.jsonl",
        "records": records,
    }


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one PASS/FAIL line per acceptance criterion."""
    lines = []
    for outcome, word in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" not in nodeid:
                continue
            if outcome == "passed" and report.when != "call":
                continue
            name = nodeid.split("::")[-1]
            label = name.removeprefix("test_").replace("_", " ")
            lines.append((name, f"{word} {label}"))
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for _, line in sorted(set(lines)):
            terminalreporter.write_line(line)
