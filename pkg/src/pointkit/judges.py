"""Answer-grading judges behind a single call contract.

A judge receives one rendered prompt and returns free-form text; the caller
extracts a score from that text with :func:`parse_score`. Two implementations
ship: a deterministic offline stub (token-level F1 between model answer and
ground truth) and an HTTP client for an external chat-completion endpoint.
The stub keeps the whole test suite network-free.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
import urllib.request
from collections import Counter
from typing import Callable, Protocol

from .errors import InvalidConfig, JudgeUnavailable

_SCORE_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)")
_SECTION_RE = re.compile(r"^### (Question|Ground truth|Model answer|Instructions)$", re.M)

_TEMPLATE = """You are grading a model's answer to a question about a 3D scene.

### Question
{question}

### Ground truth
{ground_truth}

### Model answer
{model_answer}

### Instructions
Compare the model answer with the ground truth and reply with a single
correctness score between 0 and 1, where 1 means fully correct.
"""


def build_prompt(question: str, ground_truth: str, model_answer: str) -> str:
    return _TEMPLATE.format(
        question=question, ground_truth=ground_truth, model_answer=model_answer
    )


def parse_score(text: str) -> tuple[float | None, bool]:
    """Extract a score from judge output.

    Returns (score, clamped). The first numeric token lying in [0, 1] wins;
    if every numeric token is out of range the first one is clamped and
    flagged; with no numeric token at all the reply is unparsable -> (None,
    False) and the caller retries.
    """
    tokens = [float(m.group()) for m in _SCORE_RE.finditer(text)]
    if not tokens:
        return None, False
    for value in tokens:
        if 0.0 <= value <= 1.0:
            return value, False
    return min(1.0, max(0.0, tokens[0])), True


class Judge(Protocol):
    name: str

    def reply(self, prompt: str) -> str: ...


def _tokenize(text: str) -> list[str]:
    return re.findall(r"[a-z0-9]+", text.lower())


def token_f1(reference: str, candidate: str) -> float:
    """SQuAD-style bag-of-tokens F1; two empty strings count as a match."""
    ref, cand = _tokenize(reference), _tokenize(candidate)
    if not ref and not cand:
        return 1.0
    if not ref or not cand:
        return 0.0
    overlap = sum((Counter(ref) & Counter(cand)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(cand)
    recall = overlap / len(ref)
    return 2.0 * precision * recall / (precision + recall)


class StubJudge:
    """Offline judge: pure in (question, ground_truth, model_answer).

    It reads the prompt back (the same sections build_prompt wrote) and
    scores the answer by token F1 against the ground truth, so equal strings
    always earn 1.0 and every round is identical.
    """

    name = "stub"

    def reply(self, prompt: str) -> str:
        sections: dict[str, str] = {}
        matches = list(_SECTION_RE.finditer(prompt))
        for m, nxt in zip(matches, matches[1:] + [None]):
            end = nxt.start() if nxt else len(prompt)
            sections[m.group(1)] = prompt[m.end() : end].strip("\n")
        try:
            truth = sections["Ground truth"]
            answer = sections["Model answer"]
        except KeyError as exc:
            raise InvalidConfig(f"prompt is missing the {exc.args[0]!r} section") from None
        return f"{token_f1(truth, answer):.12f}"


class HttpJudge:
    """Chat-completion client for an external judge endpoint.

    Configuration falls back to the JUDGE_ENDPOINT / JUDGE_MODEL /
    JUDGE_API_KEY environment variables. Transport is injectable so tests
    can exercise retries without a network; concurrent callers are throttled
    by a max-in-flight semaphore. After the retry budget is exhausted the
    record-level contract is a JudgeUnavailable error.
    """

    def __init__(
        self,
        endpoint: str | None = None,
        model: str | None = None,
        api_key: str | None = None,
        *,
        timeout: float = 30.0,
        retries: int = 3,
        backoff: float = 0.5,
        max_in_flight: int = 4,
        post_fn: Callable[[str, bytes, dict[str, str], float], bytes] | None = None,
    ) -> None:
        self.endpoint = endpoint or os.environ.get("JUDGE_ENDPOINT")
        if not self.endpoint:
            raise InvalidConfig("no judge endpoint: pass endpoint= or set JUDGE_ENDPOINT")
        self.model = model or os.environ.get("JUDGE_MODEL", "gpt-4")
        self.api_key = api_key or os.environ.get("JUDGE_API_KEY")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.name = f"http:{self.model}"
        self._post = post_fn or _urllib_post
        self._gate = threading.Semaphore(max_in_flight)

    def reply(self, prompt: str) -> str:
        payload = json.dumps(
            {"model": self.model, "messages": [{"role": "user", "content": prompt}]}
        ).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                with self._gate:
                    raw = self._post(self.endpoint, payload, headers, self.timeout)
                data = json.loads(raw.decode("utf-8"))
                return str(data["choices"][0]["message"]["content"])
            except (OSError, ValueError, KeyError, IndexError, TypeError) as exc:
                last = exc
                if attempt < self.retries:
                    time.sleep(self.backoff * 2.0**attempt)
        raise JudgeUnavailable(
            f"judge endpoint failed after {self.retries + 1} attempts: {last!r}"
        )


def _urllib_post(url: str, payload: bytes, headers: dict[str, str], timeout: float) -> bytes:
    req = urllib.request.Request(url, data=payload, headers=headers, method="POST")
    with urllib.request.urlopen(req, timeout=timeout) as resp:
        return resp.read()
