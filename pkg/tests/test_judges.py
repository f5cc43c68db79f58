import json

import pytest

from pointkit import (
    HttpJudge,
    InvalidConfig,
    JudgeUnavailable,
    StubJudge,
    build_prompt,
    parse_score,
    token_f1,
)


class TestParseScore:
    @pytest.mark.parametrize(
        "text,expect",
        [
            ("0.8", (0.8, False)),
            ("Score: 0.8/1", (0.8, False)),
            ("1", (1.0, False)),
            ("0", (0.0, False)),
            (".75", (0.75, False)),
            ("+0.5 seems right", (0.5, False)),
            ("I rate this 4 out of 5, so 0.8", (0.8, False)),
            ("between 0.2 and 0.9", (0.2, False)),
            ("2", (1.0, True)),
            ("-0.5", (0.0, True)),
            ("grade: 7/10", (1.0, True)),
            ("no digits here", (None, False)),
            ("", (None, False)),
        ],
    )
    def test_cases(self, text, expect):
        assert parse_score(text) == expect

    def test_in_range_token_beats_earlier_out_of_range(self):
        score, clamped = parse_score("on a 1-10 scale I give 7, i.e. 0.7")
        assert (score, clamped) == (1.0, False)  # "1" is already in range


class TestPrompt:
    def test_sections_present(self):
        prompt = build_prompt("how many chairs?", "three", "3 chairs")
        for header in ("### Question", "### Ground truth", "### Model answer", "### Instructions"):
            assert header in prompt
        assert "how many chairs?" in prompt
        assert prompt.index("three") < prompt.index("3 chairs")


class TestTokenF1:
    @pytest.mark.parametrize(
        "ref,cand,expect",
        [
            ("red apple", "red apple", 1.0),
            ("red apple", "Red  APPLE.", 1.0),
            ("red apple", "apple", 2.0 / 3.0),
            ("a b c d", "c d e f", 0.5),
            ("table", "chair", 0.0),
            ("", "", 1.0),
            ("table", "", 0.0),
            ("", "chair", 0.0),
        ],
    )
    def test_cases(self, ref, cand, expect):
        assert abs(token_f1(ref, cand) - expect) < 1e-12

    def test_duplicates_use_multiset_overlap(self):
        # one shared "go": precision 1/3, recall 1/2
        assert abs(token_f1("go go", "go stop stop") - 0.4) < 1e-12


class TestStubJudge:
    def test_exact_answer_scores_one(self):
        judge = StubJudge()
        reply = judge.reply(build_prompt("q", "the red chair", "the red chair"))
        assert parse_score(reply) == (1.0, False)

    def test_matches_token_f1(self):
        judge = StubJudge()
        reply = judge.reply(build_prompt("q", "red apple", "apple"))
        score, clamped = parse_score(reply)
        assert not clamped
        assert abs(score - token_f1("red apple", "apple")) < 1e-12

    def test_pure(self):
        judge = StubJudge()
        prompt = build_prompt("q", "gt", "ans")
        assert judge.reply(prompt) == judge.reply(prompt)

    def test_rejects_prompt_without_sections(self):
        with pytest.raises(InvalidConfig):
            StubJudge().reply("just text")


def chat_reply(content: str) -> bytes:
    return json.dumps({"choices": [{"message": {"content": content}}]}).encode()


class TestHttpJudge:
    def test_requires_endpoint(self, monkeypatch):
        monkeypatch.delenv("JUDGE_ENDPOINT", raising=False)
        with pytest.raises(InvalidConfig):
            HttpJudge()

    def test_env_fallback(self, monkeypatch):
        monkeypatch.setenv("JUDGE_ENDPOINT", "http://judge.local/v1")
        monkeypatch.setenv("JUDGE_MODEL", "grader-2")
        judge = HttpJudge(post_fn=lambda *a: chat_reply("0.5"))
        assert judge.endpoint == "http://judge.local/v1"
        assert judge.name == "http:grader-2"

    def test_success_payload_and_headers(self):
        seen = {}

        def post(url, payload, headers, timeout):
            seen.update(url=url, payload=json.loads(payload), headers=headers)
            return chat_reply("0.75")

        judge = HttpJudge("http://x/v1", model="m", api_key="k", post_fn=post)
        assert judge.reply("grade this") == "0.75"
        assert seen["url"] == "http://x/v1"
        assert seen["payload"]["model"] == "m"
        assert seen["payload"]["messages"][0]["content"] == "grade this"
        assert seen["headers"]["Authorization"] == "Bearer k"

    def test_retries_then_succeeds(self):
        calls = []

        def post(url, payload, headers, timeout):
            calls.append(1)
            if len(calls) < 3:
                raise OSError("connection refused")
            return chat_reply("0.9")

        judge = HttpJudge("http://x/v1", post_fn=post, backoff=0.0)
        assert judge.reply("p") == "0.9"
        assert len(calls) == 3

    def test_exhausted_retries_raise(self):
        def post(url, payload, headers, timeout):
            raise OSError("down")

        judge = HttpJudge("http://x/v1", post_fn=post, retries=2, backoff=0.0)
        with pytest.raises(JudgeUnavailable):
            judge.reply("p")

    def test_malformed_body_counts_as_failure(self):
        judge = HttpJudge(
            "http://x/v1", post_fn=lambda *a: b"{\"nope\": 1}", retries=1, backoff=0.0
        )
        with pytest.raises(JudgeUnavailable):
            judge.reply("p")
