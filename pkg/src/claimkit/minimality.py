"""Controlled audit of minimality loss in decontextualized claims.

A revision that entails more than one of its response's atomic facts is a
multi-fact revision. For each such revision the pipeline samples a banned
auxiliary fact, generates evidence that supports every other fact while
avoiding the banned one, and then verifies the core fact, the revision,
and the banned fact against that evidence. A case where the core fact
survives but the revision does not is automatically non-minimal.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

from .core import AtomicClaim, Label, RevisedClaim, Strategy, comparable_text
from .errors import EmptyKeys, GenerationLeak, InvalidClaim, MalformedResponse
from .providers import CheckProvider, EntailmentProvider, PromptRunner, SUPPORTED
from .tables import format_percent, markdown_table


@dataclass(frozen=True)
class MultiFactRecord:
    """A revision entailing its core fact plus at least one auxiliary fact."""

    decontext: RevisedClaim
    core_claim: AtomicClaim
    entailed_aux: tuple[AtomicClaim, ...]

    def __post_init__(self) -> None:
        if not self.entailed_aux:
            raise ValueError("a multi-fact record needs at least one auxiliary fact")
        if any(aux.claim_id == self.core_claim.claim_id for aux in self.entailed_aux):
            raise ValueError("the core fact cannot appear among the auxiliaries")


@dataclass(frozen=True)
class PartialEvidenceCase:
    """A multi-fact revision paired with evidence that omits its banned fact."""

    record: MultiFactRecord
    banned_fact: AtomicClaim
    key_facts: tuple[AtomicClaim, ...]
    evidence_text: str
    seed: int

    def __post_init__(self) -> None:
        aux_ids = {aux.claim_id for aux in self.record.entailed_aux}
        if self.banned_fact.claim_id not in aux_ids:
            raise ValueError("banned fact must be one of the entailed auxiliaries")
        if any(key.claim_id == self.banned_fact.claim_id for key in self.key_facts):
            raise ValueError("banned fact cannot appear among the key facts")
        if not self.key_facts:
            raise ValueError("key facts must be non-empty")


@dataclass(frozen=True)
class MinimalityVerdict:
    """Outcome of verifying one case's core, revision, and banned fact."""

    claim_id: str
    strategy: Strategy
    banned_claim_id: str
    core_supported: bool
    decontext_supported: bool
    banned_supported: bool
    auto_nonminimal: bool

    def __post_init__(self) -> None:
        expected = self.core_supported and not self.decontext_supported and not self.banned_supported
        if self.auto_nonminimal != expected:
            raise ValueError("auto_nonminimal must follow its defining conjunction")

    def to_record(self) -> dict[str, Any]:
        return {
            "claim_id": self.claim_id,
            "strategy": self.strategy.value,
            "banned_claim_id": self.banned_claim_id,
            "core_supported": self.core_supported,
            "decontext_supported": self.decontext_supported,
            "banned_supported": self.banned_supported,
            "auto_nonminimal": self.auto_nonminimal,
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "MinimalityVerdict":
        return cls(
            claim_id=str(record["claim_id"]),
            strategy=Strategy(record["strategy"]),
            banned_claim_id=str(record["banned_claim_id"]),
            core_supported=bool(record["core_supported"]),
            decontext_supported=bool(record["decontext_supported"]),
            banned_supported=bool(record["banned_supported"]),
            auto_nonminimal=bool(record["auto_nonminimal"]),
        )


def substring_filtered(claims: Sequence[AtomicClaim]) -> list[AtomicClaim]:
    """Drop every claim standing in a substring relation with another claim.

    Containment is tested on normalized text with trailing terminators
    stripped; both members of a containing pair are excluded.
    """
    comparable = {claim.claim_id: comparable_text(claim.text) for claim in claims}
    retained = []
    for claim in claims:
        mine = comparable[claim.claim_id]
        in_pair = any(
            other.claim_id != claim.claim_id
            and (mine in comparable[other.claim_id] or comparable[other.claim_id] in mine)
            for other in claims
        )
        if not in_pair:
            retained.append(claim)
    return retained


def find_multifact(
    decontext: RevisedClaim,
    claims: Sequence[AtomicClaim],
    entail: EntailmentProvider,
    apply_substring_filter: bool = True,
) -> MultiFactRecord | None:
    """Detect whether a revision entails more than one atomic fact.

    ``claims`` is the full claim list of the revision's response. The
    substring filter removes auxiliary candidates before entailment
    counting; the core fact is exempt because it must be entailed anyway.
    Returns None when the core is not entailed or no auxiliary is.
    """
    by_id = {claim.claim_id: claim for claim in claims}
    core = by_id.get(decontext.claim_id)
    if core is None:
        raise InvalidClaim(f"revision {decontext.claim_id} is not derived from the given claims")
    if entail.entail(decontext.text, core.text).label != SUPPORTED:
        return None
    candidates = substring_filtered(claims) if apply_substring_filter else list(claims)
    aux = tuple(
        claim
        for claim in candidates
        if claim.claim_id != core.claim_id
        and entail.entail(decontext.text, claim.text).label == SUPPORTED
    )
    if not aux:
        return None
    return MultiFactRecord(decontext=decontext, core_claim=core, entailed_aux=aux)


def sample_banned_and_keys(
    record: MultiFactRecord,
    all_claims: Sequence[AtomicClaim],
    seed: int,
    entail: EntailmentProvider,
) -> tuple[AtomicClaim, list[AtomicClaim]]:
    """Sample the banned fact and assemble the key-fact set.

    The banned fact is drawn uniformly from the entailed auxiliaries with
    the given seed. Key facts are all of the response's claims except the
    banned fact, minus any key the entailment scorer finds similar to the
    banned fact (premise = key, hypothesis = banned).
    """
    rng = random.Random(seed)
    ordered_aux = sorted(record.entailed_aux, key=lambda claim: claim.claim_id)
    banned = ordered_aux[0] if len(ordered_aux) == 1 else rng.choice(ordered_aux)
    keys = [claim for claim in all_claims if claim.claim_id != banned.claim_id]
    keys = [key for key in keys if entail.entail(key.text, banned.text).label != SUPPORTED]
    if not keys:
        raise EmptyKeys(f"no key facts remain for banned fact {banned.claim_id}")
    return banned, keys


def _key_facts_block(keys: Sequence[AtomicClaim]) -> str:
    return "\n".join(f"- {key.text}" for key in keys)


def generate_partial_evidence(
    keys: Sequence[AtomicClaim],
    banned: AtomicClaim,
    runner: PromptRunner,
    check: CheckProvider,
    max_retries: int = 1,
) -> str:
    """Generate an evidence article supporting the keys and not the banned fact.

    Each candidate article is screened with the verifier; an article that
    still supports the banned fact triggers a regeneration with an
    escalated instruction. After ``max_retries`` regenerations the case is
    abandoned with GenerationLeak.
    """
    if not keys:
        raise EmptyKeys("cannot generate evidence without key facts")
    template = "evidence_gen"
    for _attempt in range(max_retries + 1):
        data = runner.complete_json(template, key_facts=_key_facts_block(keys), banned_fact=banned.text)
        article = str(data.get("article") or "").strip()
        if not article:
            raise MalformedResponse("evidence generation returned no article")
        if check.check(article, banned.text).label is Label.NOT_SUPPORTED:
            return article
        template = "evidence_gen_retry"
    raise GenerationLeak(f"generated evidence keeps supporting banned fact {banned.claim_id}")


def classify_case(case: PartialEvidenceCase, check: CheckProvider) -> MinimalityVerdict:
    """Verify core, revision, and banned fact against the case's evidence."""
    core = check.check(case.evidence_text, case.record.core_claim.text).label is Label.SUPPORTED
    decontext = check.check(case.evidence_text, case.record.decontext.text).label is Label.SUPPORTED
    banned = check.check(case.evidence_text, case.banned_fact.text).label is Label.SUPPORTED
    return MinimalityVerdict(
        claim_id=case.record.core_claim.claim_id,
        strategy=case.record.decontext.strategy,
        banned_claim_id=case.banned_fact.claim_id,
        core_supported=core,
        decontext_supported=decontext,
        banned_supported=banned,
        auto_nonminimal=core and not decontext and not banned,
    )


@dataclass(frozen=True)
class MinimalityRow:
    strategy: str
    corpus_size: int
    potential_count: int
    auto_count: int

    @property
    def potential_rate(self) -> float:
        return self.potential_count / self.corpus_size if self.corpus_size else 0.0

    @property
    def auto_rate(self) -> float:
        return self.auto_count / self.corpus_size if self.corpus_size else 0.0


@dataclass(frozen=True)
class MinimalityReport:
    rows: tuple[MinimalityRow, ...]
    drop_counts: tuple[tuple[str, str, int], ...] = ()

    def to_markdown(self) -> str:
        return format_minimality_table(
            [(row.strategy, row.potential_rate, row.auto_rate) for row in self.rows]
        )

    def to_csv_rows(self) -> list[list[str]]:
        header = ["strategy", "corpus_size", "potential_count", "auto_count", "potential_rate", "auto_rate"]
        body = [
            [
                row.strategy,
                str(row.corpus_size),
                str(row.potential_count),
                str(row.auto_count),
                format_percent(row.potential_rate, 2),
                format_percent(row.auto_rate, 2),
            ]
            for row in self.rows
        ]
        return [header, *body]


def minimality_report(
    verdicts: Iterable[MinimalityVerdict],
    corpus_size: int,
    drops: Iterable[tuple[str, str, str]] = (),
) -> MinimalityReport:
    """Aggregate verdicts into per-strategy potential/auto non-minimal rates.

    ``corpus_size`` is the size of the full claim set, which is the
    denominator for both rates. ``drops`` are (claim_id, strategy, reason)
    triples for cases abandoned before classification.
    """
    if corpus_size <= 0:
        raise ValueError("corpus_size must be positive")
    by_strategy: dict[str, list[MinimalityVerdict]] = {}
    for verdict in sorted(verdicts, key=lambda v: (v.strategy.value, v.claim_id)):
        by_strategy.setdefault(verdict.strategy.value, []).append(verdict)
    rows = tuple(
        MinimalityRow(
            strategy=strategy,
            corpus_size=corpus_size,
            potential_count=len(group),
            auto_count=sum(1 for v in group if v.auto_nonminimal),
        )
        for strategy, group in sorted(by_strategy.items())
    )
    drop_counter: dict[tuple[str, str], int] = {}
    for _claim_id, strategy, reason in drops:
        drop_counter[(strategy, reason)] = drop_counter.get((strategy, reason), 0) + 1
    drop_counts = tuple(
        (strategy, reason, count) for (strategy, reason), count in sorted(drop_counter.items())
    )
    return MinimalityReport(rows=rows, drop_counts=drop_counts)


def format_minimality_table(rows: Sequence[tuple[str, float, float]]) -> str:
    """Markdown table of per-strategy minimality-loss rates.

    Rows are (label, potential_fraction, auto_fraction); percentages are
    rendered with two decimals.
    """
    return markdown_table(
        ["Baseline", "Potential Non-minimal", "Auto Non-minimal"],
        [[label, format_percent(pot, 2), format_percent(auto, 2)] for label, pot, auto in rows],
    )


def format_human_minimality_table(rows: Sequence[tuple[str, float, float]]) -> str:
    """Markdown table splitting the auto non-minimal subset by human label."""
    return markdown_table(
        ["Category", "Minimal", "Non-minimal"],
        [
            [label, format_percent(minimal, 1), format_percent(non_minimal, 1)]
            for label, minimal, non_minimal in rows
        ],
    )


def human_minimality_split(
    annotations: Iterable[Mapping[str, Any]],
) -> list[tuple[str, float, float]]:
    """Summarize ingested human minimal/non-minimal adjudications per strategy.

    Each annotation record carries claim_id, strategy, and a
    human_minimality_label of ``minimal`` or ``non-minimal``. The tool
    only aggregates; it never assigns these labels itself.
    """
    tallies: dict[str, list[int]] = {}
    for record in annotations:
        label = str(record["human_minimality_label"]).strip().lower()
        if label not in ("minimal", "non-minimal"):
            raise ValueError(f"unknown minimality label: {label!r}")
        strategy = str(record["strategy"])
        bucket = tallies.setdefault(strategy, [0, 0])
        bucket[0 if label == "minimal" else 1] += 1
    rows = []
    for strategy, (minimal, non_minimal) in sorted(tallies.items()):
        total = minimal + non_minimal
        rows.append((strategy, minimal / total, non_minimal / total))
    return rows
