"""
Grounding accuracy and judged QA, end to end
============================================

Part one degrades a set of oriented boxes with growing pose noise and
watches accuracy at two IoU thresholds fall off. Part two writes a small
QA file, scores it with the offline judge, and prints the markdown report.
No network, no fixtures, everything is generated below.
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from pointkit import (
    StubJudge,
    aggregate,
    corners_from_pose,
    emit_report,
    format_box,
    ingest,
    reg_accuracy,
    run_eval,
)

rng = np.random.default_rng(3)


def random_rotation():
    # QR of a Gaussian matrix, sign-fixed so the determinant is +1.
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


truths = [
    corners_from_pose(rng.uniform(-4, 4, 3),
                      rng.uniform(0.3, 1.2, 3),
                      random_rotation())
    for _ in range(40)
]

print(f"{'center noise':>12} {'acc@0.25':>9} {'acc@0.50':>9}")
for noise in (0.0, 0.05, 0.1, 0.2, 0.4, 0.8):
    preds = [
        corners_from_pose(t.center + rng.normal(0, noise, 3),
                          t.half_extents * rng.uniform(0.9, 1.1, 3),
                          t.rotation)
        for t in truths
    ]
    pairs = list(zip(preds, truths))
    print(f"{noise:>12.2f} {reg_accuracy(pairs, 0.25):>9.2f}"
          f" {reg_accuracy(pairs, 0.5):>9.2f}")

# Predictions arrive as text in practice. A line that fails to parse is a
# miss, not a crash; only a bad ground-truth line is fatal.
text_pairs = [
    (format_box(truths[0]), format_box(truths[0])),
    ("the chair next to the window", format_box(truths[1])),
]
print(f"\nwith one unparseable prediction: acc@0.25 ="
      f" {reg_accuracy(text_pairs, 0.25)}")

# Part two: judged QA. The stub judge scores by token overlap with the
# ground truth, so the partial answers below land between 0 and 1.
qa = [
    ("q1", "Rec", "What is on the desk?", "a silver laptop", "a silver laptop"),
    ("q2", "Rec", "What color is the sofa?", "dark green", "green"),
    ("q3", "Know", "What is the lamp for?", "reading light", "decoration"),
    ("q4", "Spat", "What is left of the bed?", "a small nightstand",
     "a small nightstand"),
    ("q5", "Spat", "Where is the rug?", "under the coffee table",
     "next to the door"),
    ("q6", "Gen", "Describe the room.", "a tidy bedroom with one window",
     "a tidy bedroom with one window"),
]

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "qa.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for rid, cap, question, truth, answer in qa:
            fh.write(json.dumps({
                "id": rid,
                "capability": cap,
                "question": question,
                "ground_truth": truth,
                "model_answer": answer,
            }) + "\n")
    records = ingest(path)

scores, unscored = run_eval(records, StubJudge(), k=5)
report = aggregate(scores, records, judge_name="stub", k_rounds=5)

print()
print(emit_report(report, format="markdown").decode())
