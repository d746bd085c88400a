"""Provider plumbing: replay, recording, caching, thresholds, parsing."""

from __future__ import annotations

import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from claimkit.core import Label
from claimkit.errors import MalformedResponse, ReplayMiss
from claimkit.providers import (
    CheckResult,
    CompletionRequest,
    ContainmentCheckProvider,
    EntailmentResult,
    LexicalEntailmentProvider,
    PromptRunner,
    RecordingChatProvider,
    RecordingCheckProvider,
    ReplayChatProvider,
    ReplayCheckProvider,
    ReplayStore,
    ScriptedChatProvider,
    SUPPORTED,
    UNSUPPORTED,
    completion_payload,
    parse_json_object,
    request_hash,
)


def make_request(prompt="Say hi.", template="simple_decontext", seed=7):
    return CompletionRequest(
        template_id=template,
        rendered_prompt=prompt,
        temperature=0.75,
        seed=seed,
        model_tag="fixture-model",
    )


class TestReplayStore:
    def test_replay_is_a_lookup(self, tmp_path):
        store = ReplayStore(tmp_path)
        request = make_request()
        store.save(request_hash(completion_payload(request)), completion_payload(request), {"text": "Paris"})
        assert ReplayChatProvider(store).complete(request) == "Paris"

    def test_replay_is_deterministic(self, tmp_path):
        store = ReplayStore(tmp_path)
        request = make_request()
        store.save(request_hash(completion_payload(request)), completion_payload(request), {"text": "Paris"})
        provider = ReplayChatProvider(store)
        assert provider.complete(request) == provider.complete(request)

    def test_missing_entry_raises_replay_miss(self, tmp_path):
        provider = ReplayChatProvider(ReplayStore(tmp_path))
        request = make_request()
        with pytest.raises(ReplayMiss) as excinfo:
            provider.complete(request)
        assert excinfo.value.request_hash == request_hash(completion_payload(request))

    def test_store_hash_tracks_content(self, tmp_path):
        store = ReplayStore(tmp_path)
        empty = store.store_hash()
        request = make_request()
        store.save(request_hash(completion_payload(request)), completion_payload(request), {"text": "x"})
        assert store.store_hash() != empty

    def test_seed_is_part_of_the_key(self):
        a = request_hash(completion_payload(make_request(seed=1)))
        b = request_hash(completion_payload(make_request(seed=2)))
        assert a != b


class CountingChat:
    provider_id = "counting"

    def __init__(self, reply="pong"):
        self.reply = reply
        self.upstream_calls = 0

    def complete(self, request):
        self.upstream_calls += 1
        return self.reply


class TestRecordingCache:
    def test_identical_requests_hit_upstream_once(self, tmp_path):
        inner = CountingChat()
        provider = RecordingChatProvider(inner, ReplayStore(tmp_path))
        request = make_request()
        results = [provider.complete(request) for _ in range(3)]
        assert results == ["pong"] * 3
        assert inner.upstream_calls == 1

    def test_concurrent_identical_requests_hit_upstream_once(self, tmp_path):
        inner = CountingChat()
        provider = RecordingChatProvider(inner, ReplayStore(tmp_path))
        request = make_request()
        threads = [threading.Thread(target=provider.complete, args=(request,)) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert inner.upstream_calls == 1

    def test_recorded_scores_replay_identically(self, tmp_path):
        store = ReplayStore(tmp_path)
        recording = RecordingCheckProvider(ContainmentCheckProvider(), store)
        live = recording.check("The sky is blue.", "The sky is blue.")
        replayed = ReplayCheckProvider(store).check("The sky is blue.", "The sky is blue.")
        assert replayed.score == live.score
        assert replayed.label is live.label


class TestEntailment:
    def test_reflexive_pair_supported(self):
        provider = LexicalEntailmentProvider()
        result = provider.entail(
            "The album was released in 2018.", "The album was released in 2018."
        )
        assert result.label == SUPPORTED

    def test_entails_core_and_auxiliary_fact(self):
        premise = "The 'Blackpink in Your Area' compilation album was released in 2018"
        provider = LexicalEntailmentProvider(
            overrides={
                (premise, "The album was released in 2018."): 0.9,
                (premise, "'Blackpink in Your Area' is a compilation album"): 0.9,
            }
        )
        assert provider.entail(premise, "The album was released in 2018.").label == SUPPORTED
        assert (
            provider.entail(premise, "'Blackpink in Your Area' is a compilation album").label
            == SUPPORTED
        )

    def test_known_scorer_error_is_recorded_as_supported(self):
        # Authored fixture reproducing a real scorer mistake: the longer
        # statement is wrongly judged entailed by the shorter one.
        premise = "Mey Eden offers still water products."
        hypothesis = (
            "Mey Eden, one of the largest bottled water companies in Israel, "
            "offers flavored water products."
        )
        provider = LexicalEntailmentProvider(overrides={(premise, hypothesis): 0.91})
        assert provider.entail(premise, hypothesis).label == SUPPORTED

    def test_direction_matters(self):
        provider = LexicalEntailmentProvider()
        long = "The band formed in Stockholm in 2009"
        short = "The band formed in Stockholm"
        assert provider.entail(long, short).label == SUPPORTED
        assert provider.entail(short, long).label == UNSUPPORTED

    def test_empty_inputs_rejected(self):
        with pytest.raises(ValueError):
            LexicalEntailmentProvider().entail("", "x")


class TestCheck:
    def test_verbatim_containment_scores_one(self):
        provider = ContainmentCheckProvider()
        result = provider.check("Intro. The cat sat on the mat. Outro.", "The cat sat on the mat.")
        assert result.score == 1.0
        assert result.label is Label.SUPPORTED

    def test_unmentioned_entity_scores_zero(self):
        provider = ContainmentCheckProvider()
        result = provider.check("A paragraph about glaciers.", "Ann Jansson won a medal.")
        assert result.score == 0.0
        assert result.label is Label.NOT_SUPPORTED

    def test_boundary_score_is_supported(self):
        assert CheckResult.from_score(0.5, 0.5).label is Label.SUPPORTED

    def test_call_count_instrumentation(self):
        provider = ContainmentCheckProvider()
        provider.check("a b c", "a b")
        provider.check("a b c", "z")
        assert len(provider.calls) == 2


@given(
    score=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
    low=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
    high=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
)
@settings(max_examples=300)
def test_threshold_monotonicity(score, low, high):
    """Raising the threshold never flips NOT_SUPPORTED to SUPPORTED."""
    if low > high:
        low, high = high, low
    at_low = CheckResult.from_score(score, low)
    at_high = CheckResult.from_score(score, high)
    if at_low.label is Label.NOT_SUPPORTED:
        assert at_high.label is Label.NOT_SUPPORTED
    ent_low = EntailmentResult.from_score(score, low)
    ent_high = EntailmentResult.from_score(score, high)
    if ent_low.label == UNSUPPORTED:
        assert ent_high.label == UNSUPPORTED


class TestTemplates:
    def test_all_assets_ship_and_hash(self):
        from claimkit import prompts

        hashes = prompts.all_template_hashes()
        assert set(hashes) == set(prompts.TEMPLATE_NAMES)
        assert all(len(value) == 64 for value in hashes.values())

    def test_every_template_renders(self):
        from claimkit import prompts

        variables = {
            "decompose": {"sentence": "s", "response": "r"},
            "ambiguity": {"claim": "c", "response": "r"},
            "molecular": {"claim": "c", "response": "r", "subject": "s", "criteria": "profession"},
            "simple_decontext": {"claim": "c", "response": "r"},
            "safe_revision": {"claim": "c", "response": "r"},
            "silver_ambiguity": {"claim": "c", "response": "r", "gold_disambiguations": "g"},
            "evidence_gen": {"key_facts": "- k", "banned_fact": "b"},
            "evidence_gen_retry": {"key_facts": "- k", "banned_fact": "b"},
            "llm_check": {"evidence": "e", "claim": "c"},
        }
        assert set(variables) == set(prompts.TEMPLATE_NAMES)
        for name, kwargs in variables.items():
            rendered = prompts.render(name, **kwargs)
            for value in kwargs.values():
                assert value in rendered

    def test_missing_placeholder_raises(self):
        from claimkit import prompts

        with pytest.raises(KeyError):
            prompts.render("ambiguity", claim="only the claim")


class TestLlmCheckProvider:
    def test_scores_parsed_from_json_reply(self):
        from claimkit.providers import LlmCheckProvider

        chat = ScriptedChatProvider(lambda req: '```json\n{"score": 0.9}\n```')
        provider = LlmCheckProvider(PromptRunner(chat=chat, model_tag="fixture-model"))
        result = provider.check("evidence text", "claim text")
        assert result.score == 0.9
        assert result.label is Label.SUPPORTED

    def test_out_of_range_scores_clamped(self):
        from claimkit.providers import LlmCheckProvider

        chat = ScriptedChatProvider(lambda req: '```json\n{"score": 1.7}\n```')
        provider = LlmCheckProvider(PromptRunner(chat=chat, model_tag="fixture-model"))
        assert provider.check("evidence", "claim").score == 1.0

    def test_missing_score_is_malformed(self):
        from claimkit.providers import LlmCheckProvider

        chat = ScriptedChatProvider(lambda req: '```json\n{"verdict": "yes"}\n```')
        provider = LlmCheckProvider(PromptRunner(chat=chat, model_tag="fixture-model"))
        with pytest.raises(MalformedResponse):
            provider.check("evidence", "claim")


class TestJsonParsing:
    def test_fenced_object(self):
        text = 'Sure!\n```json\n{"subject": "X", "criteria": null}\n```\n'
        assert parse_json_object(text) == {"subject": "X", "criteria": None}

    def test_bare_object(self):
        assert parse_json_object('{"a": 1}') == {"a": 1}

    def test_garbage_returns_none(self):
        assert parse_json_object("no json here") is None

    def test_retry_then_malformed(self):
        replies = iter(["not json", "still not json"])
        chat = ScriptedChatProvider(lambda req: next(replies))
        runner = PromptRunner(chat=chat, model_tag="fixture-model")
        with pytest.raises(MalformedResponse):
            runner.complete_json("ambiguity", claim="c", response="r")
        assert len(chat.calls) == 2
        assert chat.calls[1].template_id == "ambiguity#retry"

    def test_retry_succeeds_on_second_attempt(self):
        replies = iter(["oops", '```json\n{"subject": "S", "criteria": "profession"}\n```'])
        chat = ScriptedChatProvider(lambda req: next(replies))
        runner = PromptRunner(chat=chat, model_tag="fixture-model")
        data = runner.complete_json("ambiguity", claim="c", response="r")
        assert data["subject"] == "S"
