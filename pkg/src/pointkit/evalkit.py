"""QA benchmark plumbing: ingestion, K-round judge scoring, aggregation,
zero-shot retrieval accuracy and report emission.

Totals are computed over answered records only; records a judge could not
score are excluded from every denominator and surfaced as warnings, never
zero-filled.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConsistencyError,
    DegenerateFeature,
    InvalidConfig,
    JudgeUnavailable,
    ParseError,
    SchemaError,
)
from .judges import Judge, build_prompt, parse_score

CAPABILITIES = ("Rec", "Know", "Gen", "Spat", "Emb")

_REQUIRED_KEYS = ("id", "capability", "question", "ground_truth")
_ALLOWED_KEYS = frozenset(_REQUIRED_KEYS) | {"model_answer"}


@dataclass(frozen=True)
class QARecord:
    id: str
    capability: str
    question: str
    ground_truth: str
    model_answer: str = ""

    def __post_init__(self) -> None:
        for name in ("id", "capability", "question", "ground_truth", "model_answer"):
            if not isinstance(getattr(self, name), str):
                raise SchemaError(f"field {name!r} must be a string")
        if not self.id:
            raise SchemaError("record id must be non-empty")
        if self.capability not in CAPABILITIES:
            raise SchemaError(
                f"unknown capability {self.capability!r}; expected one of {list(CAPABILITIES)}"
            )


def ingest(path: str | Path) -> list[QARecord]:
    """Load line-delimited JSON QA records; blank lines are ignored."""
    records: list[QARecord] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise SchemaError(f"{path}:{lineno}: record must be a JSON object")
            missing = [k for k in _REQUIRED_KEYS if k not in obj]
            if missing:
                raise SchemaError(f"{path}:{lineno}: missing fields {missing}")
            unknown = sorted(set(obj) - _ALLOWED_KEYS)
            if unknown:
                raise SchemaError(f"{path}:{lineno}: unknown fields {unknown}")
            try:
                record = QARecord(**obj)
            except SchemaError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from None
            if record.id in seen:
                raise SchemaError(f"{path}:{lineno}: duplicate id {record.id!r}")
            seen.add(record.id)
            records.append(record)
    return records


@dataclass(frozen=True)
class ScoreRecord:
    id: str
    rounds: tuple[float, ...]
    flags: tuple[str, ...] = ()
    s_a: float = field(init=False)

    def __post_init__(self) -> None:
        if not self.rounds:
            raise InvalidConfig("a score needs at least one round")
        for r in self.rounds:
            if not 0.0 <= r <= 1.0:
                raise InvalidConfig(f"round score {r} outside [0, 1]")
        object.__setattr__(self, "s_a", sum(self.rounds) / len(self.rounds))


_PARSE_RETRIES = 3


def score_answer(record: QARecord, judge: Judge, k: int = 5) -> ScoreRecord:
    """K independent judge calls; each unparsable reply is retried up to 3
    times and then scored 0 with a flag. Transport failure inside the judge
    raises JudgeUnavailable and leaves the record unscored."""
    if k < 1:
        raise InvalidConfig("k must be >= 1")
    prompt = build_prompt(record.question, record.ground_truth, record.model_answer)
    rounds: list[float] = []
    flags: list[str] = []
    for rnd in range(k):
        value: float | None = None
        for _attempt in range(_PARSE_RETRIES + 1):
            parsed, clamped = parse_score(judge.reply(prompt))
            if parsed is not None:
                value = parsed
                if clamped:
                    flags.append(f"round {rnd}: out-of-range reply clamped")
                break
        if value is None:
            value = 0.0
            flags.append(f"round {rnd}: unparsable reply scored 0")
        rounds.append(value)
    return ScoreRecord(record.id, tuple(rounds), tuple(flags))


def run_eval(
    records: list[QARecord],
    judge: Judge,
    k: int = 5,
    max_workers: int = 1,
) -> tuple[list[ScoreRecord], list[str]]:
    """Score every record; returns (scores, unscored ids). Unscored records
    emit a RuntimeWarning and are excluded rather than zero-filled."""

    def one(record: QARecord) -> ScoreRecord | JudgeUnavailable:
        try:
            return score_answer(record, judge, k)
        except JudgeUnavailable as exc:
            return exc

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(one, records))
    else:
        results = [one(r) for r in records]
    scores: list[ScoreRecord] = []
    unscored: list[str] = []
    for record, result in zip(records, results):
        if isinstance(result, JudgeUnavailable):
            warnings.warn(f"record {record.id!r} unscored: {result}", RuntimeWarning, stacklevel=2)
            unscored.append(record.id)
        else:
            scores.append(result)
    return scores, unscored


@dataclass(frozen=True)
class Report:
    total: float | None
    per_capability: dict[str, float | None]
    counts: dict[str, int]
    judge: str
    k_rounds: int
    answered: int
    total_records: int


def aggregate(
    scores: list[ScoreRecord],
    records: list[QARecord],
    judge_name: str = "stub",
    k_rounds: int = 5,
) -> Report:
    """Capability means and the overall mean over answered records."""
    by_id = {r.id: r for r in records}
    if len(by_id) != len(records):
        raise ConsistencyError("duplicate record ids")
    seen: set[str] = set()
    sums = dict.fromkeys(CAPABILITIES, 0.0)
    counts = dict.fromkeys(CAPABILITIES, 0)
    grand = 0.0
    for score in scores:
        record = by_id.get(score.id)
        if record is None:
            raise ConsistencyError(f"score for unknown record id {score.id!r}")
        if score.id in seen:
            raise ConsistencyError(f"duplicate score for record id {score.id!r}")
        seen.add(score.id)
        sums[record.capability] += score.s_a
        counts[record.capability] += 1
        grand += score.s_a
    answered = len(scores)
    per_capability = {
        c: (sums[c] / counts[c] if counts[c] else None) for c in CAPABILITIES
    }
    total = grand / answered if answered else None
    return Report(
        total=total,
        per_capability=per_capability,
        counts=counts,
        judge=judge_name,
        k_rounds=k_rounds,
        answered=answered,
        total_records=len(records),
    )


def zeroshot_topk(
    shape_embeds: np.ndarray,
    class_embeds: np.ndarray,
    labels: np.ndarray,
    ks: tuple[int, ...] = (1, 3, 5),
) -> dict[int, float]:
    """Cosine-ranked top-k accuracy; similarity ties go to the lower class
    index. k larger than the class count simply saturates at 1."""
    shapes = np.asarray(shape_embeds, dtype=np.float64)
    classes = np.asarray(class_embeds, dtype=np.float64)
    lab = np.asarray(labels, dtype=np.int64)
    if shapes.ndim != 2 or classes.ndim != 2 or shapes.shape[1] != classes.shape[1]:
        raise InvalidConfig("embeddings must be 2-D with one shared width")
    if lab.shape != (shapes.shape[0],):
        raise InvalidConfig("labels must be one int per shape")
    if lab.size and (lab.min() < 0 or lab.max() >= classes.shape[0]):
        raise InvalidConfig("labels must index into class_embeds")
    if not ks or any(k < 1 for k in ks):
        raise InvalidConfig("each k must be >= 1")
    sn = np.linalg.norm(shapes, axis=1)
    cn = np.linalg.norm(classes, axis=1)
    if np.any(sn == 0.0) or np.any(cn == 0.0):
        raise DegenerateFeature("zero-norm embedding")
    sims = (shapes / sn[:, None]) @ (classes / cn[:, None]).T
    # stable sort of -sims keeps the lower class index first among ties
    order = np.argsort(-sims, axis=1, kind="stable")
    rank_of_true = np.argmax(order == lab[:, None], axis=1)
    return {int(k): float(np.mean(rank_of_true < k)) for k in ks}


def emit_report(report: Report, format: str = "json") -> bytes:
    """Render a report; json and markdown carry the same values (floats are
    printed with repr so the two renderings are mutually lossless)."""
    if format == "json":
        payload = {
            "total": report.total,
            "per_capability": {c: report.per_capability[c] for c in CAPABILITIES},
            "counts": {c: report.counts[c] for c in CAPABILITIES},
            "judge": report.judge,
            "k_rounds": report.k_rounds,
            "answered": report.answered,
            "total_records": report.total_records,
        }
        return (json.dumps(payload, indent=2) + "\n").encode("utf-8")
    if format == "markdown":
        def cell(v: float | None) -> str:
            return "—" if v is None else repr(v)

        head = "| Rec | Know | Gen | Spat | Emb | Total |"
        rule = "| --- | --- | --- | --- | --- | --- |"
        row = "| " + " | ".join(
            [cell(report.per_capability[c]) for c in CAPABILITIES] + [cell(report.total)]
        ) + " |"
        counts = ", ".join(f"{c}: {report.counts[c]}" for c in CAPABILITIES)
        lines = [
            head,
            rule,
            row,
            "",
            f"counts: {counts}",
            f"judge: {report.judge}, rounds: {report.k_rounds}, "
            f"answered: {report.answered}/{report.total_records}",
        ]
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise InvalidConfig(f"format must be json or markdown, got {format!r}")
