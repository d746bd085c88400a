"""The four claim-revision strategies.

ATOMIC passes claims through untouched. SIMPLE and SAFE are single-prompt
decontextualizations with the full response as context. MOLECULAR is the
two-stage pipeline: identify the ambiguous subject and a disambiguation
criterion first, then rewrite the claim using both.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .core import (
    AtomicClaim,
    DisambiguationCriteria,
    ModelResponse,
    RevisedClaim,
    Strategy,
    normalize_text,
)
from .decomposition import parse_claim_lines
from .errors import InvalidClaim, MalformedResponse
from .providers import PromptRunner

_QUOTE_PAIRS = [('"', '"'), ("'", "'"), ("“", "”"), ("‘", "’"), ("`", "`")]


@dataclass(frozen=True)
class AmbiguityFinding:
    """Stage-1 output: the claim's main subject and how to disambiguate it."""

    subject: str
    criteria: DisambiguationCriteria
    rationale: str = ""

    def __post_init__(self) -> None:
        if not normalize_text(self.subject):
            raise ValueError("subject must be non-empty")


def clean_revision(raw: str) -> str:
    """Trim a model revision down to the bare sentence.

    Models often wrap the rewrite in quotes or a list marker; templates
    ask for a bare sentence, so surrounding decoration is stripped.
    """
    lines = parse_claim_lines(raw)
    if not lines:
        raise MalformedResponse("revision completion is empty")
    text = lines[0]
    changed = True
    while changed:
        changed = False
        for open_q, close_q in _QUOTE_PAIRS:
            if len(text) > 1 and text.startswith(open_q) and text.endswith(close_q):
                text = text[1:-1].strip()
                changed = True
    if not text:
        raise MalformedResponse("revision completion is empty after trimming")
    return text


def _require_same_response(claim: AtomicClaim, response: ModelResponse) -> None:
    if claim.response_id != response.response_id:
        raise InvalidClaim(
            f"claim {claim.claim_id} belongs to response {claim.response_id}, "
            f"not {response.response_id}"
        )


def atomic_passthrough(claim: AtomicClaim) -> RevisedClaim:
    """The identity baseline: the claim is judged exactly as extracted."""
    if not normalize_text(claim.text):
        raise InvalidClaim(f"claim {claim.claim_id} has empty text")
    return RevisedClaim.from_source(claim, Strategy.ATOMIC, claim.text)


def simple_decontext(claim: AtomicClaim, response: ModelResponse, runner: PromptRunner) -> RevisedClaim:
    """Single-prompt decontextualization with the response as context."""
    _require_same_response(claim, response)
    raw = runner.complete("simple_decontext", claim=claim.text, response=response.text)
    return RevisedClaim.from_source(claim, Strategy.SIMPLE, clean_revision(raw))


def safe_decontext(claim: AtomicClaim, response: ModelResponse, runner: PromptRunner) -> RevisedClaim:
    """Conservative revision: fix vague references, change nothing else."""
    _require_same_response(claim, response)
    raw = runner.complete("safe_revision", claim=claim.text, response=response.text)
    return RevisedClaim.from_source(claim, Strategy.SAFE, clean_revision(raw))


def identify_ambiguity(claim: AtomicClaim, response: ModelResponse, runner: PromptRunner) -> AmbiguityFinding:
    """Stage 1: name the claim's main subject and a disambiguation criterion.

    The criterion is NONE when the model reports no same-name ambiguity.
    """
    if not normalize_text(claim.text):
        raise InvalidClaim(f"claim {claim.claim_id} has empty text")
    data = runner.complete_json("ambiguity", claim=claim.text, response=response.text)
    subject = normalize_text(str(data.get("subject") or ""))
    if not subject:
        raise MalformedResponse("ambiguity stage returned no subject")
    return AmbiguityFinding(
        subject=subject,
        criteria=DisambiguationCriteria.from_raw(data.get("criteria")),
        rationale=str(data.get("rationale") or ""),
    )


def generate_molecular(
    claim: AtomicClaim,
    response: ModelResponse,
    finding: AmbiguityFinding,
    runner: PromptRunner,
) -> RevisedClaim:
    """Stage 2: rewrite the claim using the identified subject and criterion.

    When the criterion is NONE the stage still runs, but the template
    forbids adding identity descriptors: only pronouns and incomplete
    references get completed.
    """
    _require_same_response(claim, response)
    raw = runner.complete(
        "molecular",
        claim=claim.text,
        response=response.text,
        subject=finding.subject,
        criteria=finding.criteria.value or "None",
    )
    return RevisedClaim.from_source(
        claim,
        Strategy.MOLECULAR,
        clean_revision(raw),
        subject=finding.subject,
        criteria=finding.criteria,
    )


def molecular_decontext(
    claim: AtomicClaim,
    response: ModelResponse,
    runner: PromptRunner,
    skip_stage2_on_none: bool = False,
) -> RevisedClaim:
    """Two-stage molecular revision: identify_ambiguity then generate_molecular.

    With ``skip_stage2_on_none`` the second completion is skipped for
    unambiguous subjects and the claim text is kept as-is (off by default).
    """
    finding = identify_ambiguity(claim, response, runner)
    if skip_stage2_on_none and finding.criteria.is_none:
        return RevisedClaim.from_source(
            claim, Strategy.MOLECULAR, claim.text, subject=finding.subject, criteria=finding.criteria
        )
    return generate_molecular(claim, response, finding, runner)


def revise(
    claim: AtomicClaim,
    response: ModelResponse,
    strategy: Strategy,
    runner: PromptRunner | None,
    skip_stage2_on_none: bool = False,
) -> RevisedClaim:
    """Dispatch a claim through one named strategy."""
    if strategy is Strategy.ATOMIC:
        return atomic_passthrough(claim)
    if runner is None:
        raise ValueError(f"strategy {strategy.value} needs a chat provider")
    if strategy is Strategy.SIMPLE:
        return simple_decontext(claim, response, runner)
    if strategy is Strategy.SAFE:
        return safe_decontext(claim, response, runner)
    return molecular_decontext(claim, response, runner, skip_stage2_on_none=skip_stage2_on_none)


def modification_rate(revisions: Iterable[RevisedClaim]) -> float:
    """Fraction of revisions whose text differs from the source claim."""
    revisions = list(revisions)
    if not revisions:
        return 0.0
    return sum(1 for rev in revisions if rev.modified) / len(revisions)


def verify_modification_flags(
    revisions: Iterable[RevisedClaim], claims_by_id: Mapping[str, AtomicClaim]
) -> list[str]:
    """Exhaustively re-derive the modified flag; returns offending claim ids."""
    offenders = []
    for rev in revisions:
        source = claims_by_id[rev.claim_id]
        expected = normalize_text(rev.text) != normalize_text(source.text)
        if rev.modified != expected:
            offenders.append(rev.claim_id)
    return offenders
