"""Breaking a model response into atomic claims.

The response is split into sentences and the decomposition prompt is
applied per sentence with the full response available as context. The
completion is parsed as one claim per line after list-marker stripping.
"""

from __future__ import annotations

import re

from .core import AtomicClaim, ModelResponse, normalize_text
from .errors import MalformedResponse
from .providers import PromptRunner, fan_out

# Tokens that end with a period without ending a sentence.
_ABBREVIATIONS = {
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc",
    "inc", "ltd", "co", "no", "fig", "al", "approx",
    "e.g", "i.e", "u.s", "u.k", "a.m", "p.m",
}

_TERMINATOR = re.compile(r"[.!?]+['\")\]]*(?=\s+|$)")
_LIST_MARKER = re.compile(r"^\s*(?:[-*•·]|\(?\d+[.)\]]?)\s+")


def split_sentences(text: str) -> list[str]:
    """Period/abbreviation-aware sentence splitter.

    Deliberately simple: splits on terminator runs followed by whitespace,
    except after known abbreviations and single-letter initials.
    """
    text = normalize_text(text)
    if not text:
        return []
    sentences: list[str] = []
    start = 0
    for match in _TERMINATOR.finditer(text):
        if match.group().startswith("."):
            prev_token = text[start : match.start()].rsplit(" ", 1)[-1].lower()
            prev_token = prev_token.lstrip("(\"'")
            if prev_token in _ABBREVIATIONS or (len(prev_token) == 1 and prev_token.isalpha()):
                continue
        chunk = text[start : match.end()].strip()
        if chunk:
            sentences.append(chunk)
        start = match.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def parse_claim_lines(raw: str) -> list[str]:
    """One claim per completion line, with list markers stripped."""
    claims = []
    for line in raw.splitlines():
        stripped = normalize_text(_LIST_MARKER.sub("", line))
        if stripped:
            claims.append(stripped)
    return claims


def claim_id_for(response_id: str, ordinal: int) -> str:
    """Deterministic claim identifier for a decomposed response."""
    return f"{response_id}-c{ordinal}"


def extract_atomic_facts(
    response: ModelResponse,
    runner: PromptRunner,
    max_workers: int = 1,
    checkworthy_filter: bool = False,
) -> list[AtomicClaim]:
    """Decompose a response into ordered atomic claims.

    ``checkworthy_filter`` is accepted for configuration compatibility; it
    is a pass-through that keeps every extracted claim.

    Raises MalformedResponse if any sentence's completion yields zero
    parseable claims.
    """
    del checkworthy_filter
    sentences = split_sentences(response.text)
    if not sentences:
        raise MalformedResponse("response contains no sentences to decompose")

    def decompose(sentence: str) -> list[str]:
        raw = runner.complete("decompose", sentence=sentence, response=response.text)
        texts = parse_claim_lines(raw)
        if not texts:
            raise MalformedResponse(f"decomposition yielded zero claims for sentence: {sentence!r}")
        return texts

    per_sentence = fan_out(decompose, sentences, max_workers)

    claims: list[AtomicClaim] = []
    ordinal = 0
    for texts in per_sentence:
        for text in texts:
            claims.append(
                AtomicClaim(
                    claim_id=claim_id_for(response.response_id, ordinal),
                    response_id=response.response_id,
                    text=text,
                    ordinal=ordinal,
                )
            )
            ordinal += 1
    return claims
