"""Pluggable access to the three external model capabilities.

Three provider roles exist: chat completion, pairwise entailment scoring,
and evidence-conditioned verification. Each role has a live HTTP
implementation, a replay-only implementation, and a recording wrapper
that turns any provider into a write-through content-addressed cache.

The replay store is a directory of JSON files keyed by a content hash of
the request, which is what makes whole pipeline runs reproducible even
though live sampling temperatures are nondeterministic.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Mapping, Protocol, Sequence, TypeVar

import requests

from . import prompts
from .core import Label, normalize_text, comparable_text
from .errors import MalformedResponse, ProviderUnavailable, ReplayMiss

T = TypeVar("T")
R = TypeVar("R")

SUPPORTED = "supported"
UNSUPPORTED = "unsupported"

DEFAULT_TOKEN_ENV = "CLAIMKIT_API_TOKEN"


@dataclass(frozen=True)
class CompletionRequest:
    """A fully rendered prompt plus the sampling settings that identify it."""

    template_id: str
    rendered_prompt: str
    temperature: float
    seed: int | None
    model_tag: str

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not self.rendered_prompt:
            raise ValueError("rendered_prompt must be non-empty")


@dataclass(frozen=True)
class EntailmentResult:
    """Directional entailment outcome: does the premise support the hypothesis?"""

    label: str
    score: float

    @classmethod
    def from_score(cls, score: float, threshold: float) -> "EntailmentResult":
        return cls(SUPPORTED if score >= threshold else UNSUPPORTED, score)


@dataclass(frozen=True)
class CheckResult:
    """Evidence-conditioned verification outcome for one (evidence, claim) pair."""

    score: float
    label: Label

    @classmethod
    def from_score(cls, score: float, threshold: float) -> "CheckResult":
        label = Label.SUPPORTED if score >= threshold else Label.NOT_SUPPORTED
        return cls(score, label)


class ChatProvider(Protocol):
    provider_id: str

    def complete(self, request: CompletionRequest) -> str: ...


class EntailmentProvider(Protocol):
    provider_id: str
    threshold: float

    def entail(self, premise: str, hypothesis: str) -> EntailmentResult: ...


class CheckProvider(Protocol):
    provider_id: str
    threshold: float

    def check(self, evidence: str, claim: str) -> CheckResult: ...


# ---------------------------------------------------------------------------
# Request hashing and the replay store


def request_hash(payload: Mapping[str, Any]) -> str:
    canonical = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def completion_payload(request: CompletionRequest) -> dict[str, Any]:
    return {
        "kind": "complete",
        "template_id": request.template_id,
        "rendered_prompt": request.rendered_prompt,
        "temperature": request.temperature,
        "seed": request.seed,
        "model_tag": request.model_tag,
    }


def entail_payload(premise: str, hypothesis: str) -> dict[str, Any]:
    return {"kind": "entail", "premise": premise, "hypothesis": hypothesis}


def check_payload(evidence: str, claim: str) -> dict[str, Any]:
    return {"kind": "check", "evidence": evidence, "claim": claim}


class ReplayStore:
    """Directory of JSON files, one per recorded request, keyed by hash.

    Writes are atomic (tmp file + rename) and serialized per key, so
    concurrent workers never observe a partial entry.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def lock_for(self, key: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(key, threading.Lock())

    def path_for(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def load(self, key: str) -> Any | None:
        path = self.path_for(key)
        if not path.exists():
            return None
        entry = json.loads(path.read_text(encoding="utf-8"))
        return entry["response"]

    def save(self, key: str, payload: Mapping[str, Any], response: Any) -> None:
        entry = {"kind": payload.get("kind", ""), "request": dict(payload), "response": response}
        path = self.path_for(key)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(
            json.dumps(entry, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )
        os.replace(tmp, path)

    def entry_keys(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.json"))

    def kind_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for key in self.entry_keys():
            entry = json.loads(self.path_for(key).read_text(encoding="utf-8"))
            kind = entry.get("kind", "")
            counts[kind] = counts.get(kind, 0) + 1
        return counts

    def store_hash(self) -> str:
        """Content hash over every entry, stable across file systems."""
        digest = hashlib.sha256()
        for key in self.entry_keys():
            digest.update(key.encode("utf-8"))
            digest.update(self.path_for(key).read_bytes())
        return digest.hexdigest()


# ---------------------------------------------------------------------------
# Replay and recording providers


class ReplayChatProvider:
    provider_id = "replay"

    def __init__(self, store: ReplayStore):
        self.store = store

    def complete(self, request: CompletionRequest) -> str:
        payload = completion_payload(request)
        key = request_hash(payload)
        recorded = self.store.load(key)
        if recorded is None:
            raise ReplayMiss(key, kind="complete")
        return recorded["text"]


class RecordingChatProvider:
    """Write-through cache: a store hit never reaches the inner provider."""

    def __init__(self, inner: ChatProvider, store: ReplayStore):
        self.inner = inner
        self.store = store

    @property
    def provider_id(self) -> str:
        return self.inner.provider_id

    def complete(self, request: CompletionRequest) -> str:
        payload = completion_payload(request)
        key = request_hash(payload)
        with self.store.lock_for(key):
            recorded = self.store.load(key)
            if recorded is not None:
                return recorded["text"]
            text = self.inner.complete(request)
            self.store.save(key, payload, {"text": text})
            return text


class ReplayEntailmentProvider:
    provider_id = "replay"

    def __init__(self, store: ReplayStore, threshold: float = 0.5):
        self.store = store
        self.threshold = threshold

    def entail(self, premise: str, hypothesis: str) -> EntailmentResult:
        payload = entail_payload(premise, hypothesis)
        key = request_hash(payload)
        recorded = self.store.load(key)
        if recorded is None:
            raise ReplayMiss(key, kind="entail")
        return EntailmentResult.from_score(float(recorded["score"]), self.threshold)


class RecordingEntailmentProvider:
    def __init__(self, inner: EntailmentProvider, store: ReplayStore):
        self.inner = inner
        self.store = store

    @property
    def provider_id(self) -> str:
        return self.inner.provider_id

    @property
    def threshold(self) -> float:
        return self.inner.threshold

    def entail(self, premise: str, hypothesis: str) -> EntailmentResult:
        payload = entail_payload(premise, hypothesis)
        key = request_hash(payload)
        with self.store.lock_for(key):
            recorded = self.store.load(key)
            if recorded is not None:
                return EntailmentResult.from_score(float(recorded["score"]), self.threshold)
            result = self.inner.entail(premise, hypothesis)
            self.store.save(key, payload, {"score": result.score})
            return result


class ReplayCheckProvider:
    provider_id = "replay"

    def __init__(self, store: ReplayStore, threshold: float = 0.5):
        self.store = store
        self.threshold = threshold

    def check(self, evidence: str, claim: str) -> CheckResult:
        payload = check_payload(evidence, claim)
        key = request_hash(payload)
        recorded = self.store.load(key)
        if recorded is None:
            raise ReplayMiss(key, kind="check")
        return CheckResult.from_score(float(recorded["score"]), self.threshold)


class RecordingCheckProvider:
    def __init__(self, inner: CheckProvider, store: ReplayStore):
        self.inner = inner
        self.store = store

    @property
    def provider_id(self) -> str:
        return self.inner.provider_id

    @property
    def threshold(self) -> float:
        return self.inner.threshold

    def check(self, evidence: str, claim: str) -> CheckResult:
        payload = check_payload(evidence, claim)
        key = request_hash(payload)
        with self.store.lock_for(key):
            recorded = self.store.load(key)
            if recorded is not None:
                return CheckResult.from_score(float(recorded["score"]), self.threshold)
            result = self.inner.check(evidence, claim)
            self.store.save(key, payload, {"score": result.score})
            return result


# ---------------------------------------------------------------------------
# Live HTTP providers


def _post_with_retry(
    url: str,
    body: Mapping[str, Any],
    headers: Mapping[str, str],
    timeout: float,
    max_attempts: int,
    backoff: float,
) -> dict[str, Any]:
    last_error: Exception | None = None
    for attempt in range(max_attempts):
        try:
            response = requests.post(url, json=body, headers=dict(headers), timeout=timeout)
        except requests.RequestException as exc:
            last_error = exc
        else:
            if response.status_code in (429,) or response.status_code >= 500:
                last_error = ProviderUnavailable(f"{url} returned {response.status_code}")
            elif response.status_code >= 400:
                raise ProviderUnavailable(f"{url} returned {response.status_code}: {response.text[:200]}")
            else:
                try:
                    return response.json()
                except ValueError as exc:
                    raise MalformedResponse(f"{url} returned non-JSON body") from exc
        if attempt < max_attempts - 1:
            time.sleep(backoff * (2**attempt))
    raise ProviderUnavailable(f"{url} unavailable after {max_attempts} attempts: {last_error}")


class HttpChatProvider:
    """Chat-completions wire shape against a configurable endpoint."""

    def __init__(
        self,
        endpoint: str,
        token_env: str = DEFAULT_TOKEN_ENV,
        timeout: float = 120.0,
        max_attempts: int = 3,
        backoff: float = 0.5,
    ):
        self.endpoint = endpoint
        self.token_env = token_env
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.provider_id = f"http-chat:{endpoint}"

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def complete(self, request: CompletionRequest) -> str:
        body: dict[str, Any] = {
            "model": request.model_tag,
            "messages": [{"role": "user", "content": request.rendered_prompt}],
            "temperature": request.temperature,
        }
        if request.seed is not None:
            body["seed"] = request.seed
        data = _post_with_retry(
            self.endpoint, body, self._headers(), self.timeout, self.max_attempts, self.backoff
        )
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse("chat response missing choices[0].message.content") from exc
        if not text or not text.strip():
            raise MalformedResponse("chat response body is empty")
        return text


class HttpEntailmentProvider:
    """Remote scorer taking {premise, hypothesis} and returning {score}."""

    def __init__(
        self,
        endpoint: str,
        threshold: float = 0.5,
        token_env: str = DEFAULT_TOKEN_ENV,
        timeout: float = 60.0,
        max_attempts: int = 3,
        backoff: float = 0.5,
    ):
        self.endpoint = endpoint
        self.threshold = threshold
        self.token_env = token_env
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.provider_id = f"http-entail:{endpoint}"

    def entail(self, premise: str, hypothesis: str) -> EntailmentResult:
        if not premise or not hypothesis:
            raise ValueError("premise and hypothesis must be non-empty")
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        data = _post_with_retry(
            self.endpoint,
            {"premise": premise, "hypothesis": hypothesis},
            headers,
            self.timeout,
            self.max_attempts,
            self.backoff,
        )
        if "score" not in data:
            raise MalformedResponse("entailment response missing 'score'")
        return EntailmentResult.from_score(float(data["score"]), self.threshold)


class HttpCheckProvider:
    """Remote verifier taking {evidence, claim} and returning {score}."""

    def __init__(
        self,
        endpoint: str,
        threshold: float = 0.5,
        token_env: str = DEFAULT_TOKEN_ENV,
        timeout: float = 60.0,
        max_attempts: int = 3,
        backoff: float = 0.5,
    ):
        self.endpoint = endpoint
        self.threshold = threshold
        self.token_env = token_env
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.provider_id = f"http-check:{endpoint}"

    def check(self, evidence: str, claim: str) -> CheckResult:
        if not evidence or not claim:
            raise ValueError("evidence and claim must be non-empty")
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        data = _post_with_retry(
            self.endpoint,
            {"evidence": evidence, "claim": claim},
            headers,
            self.timeout,
            self.max_attempts,
            self.backoff,
        )
        if "score" not in data:
            raise MalformedResponse("check response missing 'score'")
        return CheckResult.from_score(float(data["score"]), self.threshold)


# ---------------------------------------------------------------------------
# Deterministic offline providers (fixtures, dry runs, store construction)


class ScriptedChatProvider:
    """Chat provider answering from an authored transcript.

    The script may be a mapping from rendered prompt to reply, or a
    callable receiving the full request. Every call is recorded on
    ``calls`` so tests can assert call counts.
    """

    def __init__(self, script: Mapping[str, str] | Callable[[CompletionRequest], str], provider_id: str = "scripted-chat"):
        self._script = script
        self.provider_id = provider_id
        self.calls: list[CompletionRequest] = []

    def complete(self, request: CompletionRequest) -> str:
        self.calls.append(request)
        if callable(self._script):
            return self._script(request)
        try:
            return self._script[request.rendered_prompt]
        except KeyError:
            head = request.rendered_prompt[:120].replace("\n", " ")
            raise LookupError(f"no scripted reply for prompt starting: {head!r}") from None


class LexicalEntailmentProvider:
    """Deterministic entailment scorer for offline corpora.

    Scores 1.0 when the hypothesis is contained in the premise after
    whitespace normalization and trailing-terminator stripping, else 0.0.
    An override table of (premise, hypothesis) -> score takes precedence;
    pairs are looked up on normalized text.
    """

    def __init__(
        self,
        overrides: Mapping[tuple[str, str], float] | None = None,
        threshold: float = 0.5,
        provider_id: str = "lexical-entail",
    ):
        self.overrides = {
            (normalize_text(p), normalize_text(h)): s for (p, h), s in (overrides or {}).items()
        }
        self.threshold = threshold
        self.provider_id = provider_id
        self.calls: list[tuple[str, str]] = []

    def entail(self, premise: str, hypothesis: str) -> EntailmentResult:
        if not premise or not hypothesis:
            raise ValueError("premise and hypothesis must be non-empty")
        self.calls.append((premise, hypothesis))
        key = (normalize_text(premise), normalize_text(hypothesis))
        if key in self.overrides:
            score = self.overrides[key]
        elif comparable_text(hypothesis) and comparable_text(hypothesis) in comparable_text(premise):
            score = 1.0
        else:
            score = 0.0
        return EntailmentResult.from_score(score, self.threshold)


class ContainmentCheckProvider:
    """Deterministic verifier: containment scores 1.0, disjoint pairs 0.0.

    An override table of (evidence, claim) -> score takes precedence, for
    authoring cases where the verdict must diverge from plain containment.
    """

    def __init__(
        self,
        overrides: Mapping[tuple[str, str], float] | None = None,
        threshold: float = 0.5,
        provider_id: str = "containment-check",
    ):
        self.overrides = {
            (normalize_text(e), normalize_text(c)): s for (e, c), s in (overrides or {}).items()
        }
        self.threshold = threshold
        self.provider_id = provider_id
        self.calls: list[tuple[str, str]] = []

    def check(self, evidence: str, claim: str) -> CheckResult:
        if not evidence or not claim:
            raise ValueError("evidence and claim must be non-empty")
        self.calls.append((evidence, claim))
        key = (normalize_text(evidence), normalize_text(claim))
        if key in self.overrides:
            score = self.overrides[key]
        elif comparable_text(claim) and comparable_text(claim) in comparable_text(evidence):
            score = 1.0
        else:
            score = 0.0
        return CheckResult.from_score(score, self.threshold)


class LlmCheckProvider:
    """Verifier backed by a chat model scoring (evidence, claim) pairs.

    The scoring prompt is a generic template shipped with this package;
    use it only when no dedicated verification model is available.
    """

    def __init__(self, runner: "PromptRunner", threshold: float = 0.5):
        self.runner = runner
        self.threshold = threshold
        self.provider_id = f"llm-check:{runner.model_tag}"

    def check(self, evidence: str, claim: str) -> CheckResult:
        if not evidence or not claim:
            raise ValueError("evidence and claim must be non-empty")
        data = self.runner.complete_json("llm_check", evidence=evidence, claim=claim)
        try:
            score = float(data["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedResponse("llm check reply missing numeric 'score'") from exc
        score = min(1.0, max(0.0, score))
        return CheckResult.from_score(score, self.threshold)


# ---------------------------------------------------------------------------
# Prompt execution helpers


_JSON_FENCE = re.compile(r"```(?:json)?\s*(\{.*?\})\s*```", re.DOTALL)

STRICT_JSON_NUDGE = (
    "\n\nYour previous reply could not be parsed. "
    "Reply again with only the fenced JSON object and nothing else."
)


def parse_json_object(text: str) -> dict[str, Any] | None:
    """Extract the fenced JSON object from a completion, if any."""
    match = _JSON_FENCE.search(text)
    candidate = match.group(1) if match else None
    if candidate is None:
        start, end = text.find("{"), text.rfind("}")
        if start != -1 and end > start:
            candidate = text[start : end + 1]
    if candidate is None:
        return None
    try:
        data = json.loads(candidate)
    except json.JSONDecodeError:
        return None
    return data if isinstance(data, dict) else None


@dataclass(frozen=True)
class PromptRunner:
    """Binds a chat provider to the run's sampling settings and templates."""

    chat: ChatProvider
    temperature: float = 0.75
    seed: int | None = None
    model_tag: str = "unspecified"

    def build_request(self, template_name: str, **variables: str) -> CompletionRequest:
        return CompletionRequest(
            template_id=template_name,
            rendered_prompt=prompts.render(template_name, **variables),
            temperature=self.temperature,
            seed=self.seed,
            model_tag=self.model_tag,
        )

    def complete(self, template_name: str, **variables: str) -> str:
        return self.chat.complete(self.build_request(template_name, **variables))

    def complete_json(self, template_name: str, **variables: str) -> dict[str, Any]:
        """Run a structured stage; one reprompt retry before giving up."""
        request = self.build_request(template_name, **variables)
        parsed = parse_json_object(self.chat.complete(request))
        if parsed is not None:
            return parsed
        retry = replace(
            request,
            template_id=f"{template_name}#retry",
            rendered_prompt=request.rendered_prompt + STRICT_JSON_NUDGE,
        )
        parsed = parse_json_object(self.chat.complete(retry))
        if parsed is None:
            raise MalformedResponse(f"stage {template_name!r} did not return parseable JSON")
        return parsed


def fan_out(fn: Callable[[T], R], items: Sequence[T], max_workers: int) -> list[R]:
    """Apply ``fn`` to every item, possibly concurrently, preserving order."""
    items = list(items)
    if not items:
        return []
    if max_workers <= 1 or len(items) == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(max_workers, len(items))) as pool:
        return list(pool.map(fn, items))
