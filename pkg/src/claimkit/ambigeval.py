"""Evaluation against multi-entity evidence sets with fine-grained errors.

Each revised claim is verified against every evidence document in its
scope. A human-SUPPORTED claim counts as correct only when the supporting
documents isolate the gold entity: the gold entity's document is
supported and no other entity's document is. Incorrect evaluations fall
into exactly one of four error categories, so the category percentages
always sum to the overall error rate.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

from .core import EvidenceDocument, Judgment, Label, RevisedClaim, Strategy
from .errors import MissingAnnotation
from .providers import CheckProvider, EntailmentProvider, SUPPORTED, fan_out
from .tables import format_length, format_percent, markdown_table

MULTI_EVIDENCE_MATCHED = "MULTI_EVIDENCE_MATCHED"
SINGLE_EVIDENCE_WRONG_ENTITY = "SINGLE_EVIDENCE_WRONG_ENTITY"
NO_EVIDENCE_MATCHED = "NO_EVIDENCE_MATCHED"
FALSE_SUPPORT = "FALSE_SUPPORT"

ERROR_CATEGORIES = (
    MULTI_EVIDENCE_MATCHED,
    SINGLE_EVIDENCE_WRONG_ENTITY,
    NO_EVIDENCE_MATCHED,
    FALSE_SUPPORT,
)


@dataclass(frozen=True)
class ClaimEvaluation:
    """Judgments of one revised claim against its full evidence set."""

    claim_id: str
    strategy: Strategy
    judgments: tuple[Judgment, ...]
    human_label: Label
    gold_entity_id: str | None
    correct: bool
    supported_entity_ids: tuple[str, ...]
    gold_supported: bool

    @property
    def predicted_label(self) -> Label:
        if any(j.label is Label.SUPPORTED for j in self.judgments):
            return Label.SUPPORTED
        return Label.NOT_SUPPORTED

    @property
    def error_category(self) -> str | None:
        """The single error bucket of an incorrect evaluation, else None."""
        if self.correct:
            return None
        if self.human_label is Label.NOT_SUPPORTED:
            return FALSE_SUPPORT
        if self.predicted_label is Label.NOT_SUPPORTED:
            return NO_EVIDENCE_MATCHED
        if len(self.supported_entity_ids) > 1:
            return MULTI_EVIDENCE_MATCHED
        return SINGLE_EVIDENCE_WRONG_ENTITY

    def to_record(self) -> dict[str, Any]:
        return {
            "claim_id": self.claim_id,
            "strategy": self.strategy.value,
            "judgments": [j.to_record() for j in self.judgments],
            "human_label": self.human_label.value,
            "gold_entity_id": self.gold_entity_id,
            "correct": self.correct,
            "supported_entity_ids": list(self.supported_entity_ids),
            "gold_supported": self.gold_supported,
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "ClaimEvaluation":
        return cls(
            claim_id=str(record["claim_id"]),
            strategy=Strategy(record["strategy"]),
            judgments=tuple(Judgment.from_record(j) for j in record["judgments"]),
            human_label=Label(record["human_label"]),
            gold_entity_id=record.get("gold_entity_id"),
            correct=bool(record["correct"]),
            supported_entity_ids=tuple(record["supported_entity_ids"]),
            gold_supported=bool(record["gold_supported"]),
        )


def judge_claim(
    rev: RevisedClaim,
    docs: Sequence[EvidenceDocument],
    human_label: Label,
    check: CheckProvider,
    max_workers: int = 1,
) -> ClaimEvaluation:
    """Verify one revised claim against every document in its evidence set.

    Issues exactly one verification call per document. The gold entity is
    taken from the documents flagged is_gold_entity, of which there may be
    at most one distinct entity.
    """
    if not docs:
        raise ValueError("docs must be non-empty")
    gold_entities = {doc.entity_id for doc in docs if doc.is_gold_entity}
    if len(gold_entities) > 1:
        raise ValueError(f"multiple gold entities flagged for claim {rev.claim_id}")
    gold_entity_id = next(iter(gold_entities)) if gold_entities else None

    results = fan_out(lambda doc: check.check(doc.text, rev.text), docs, max_workers)
    judgments = tuple(
        Judgment.from_score(rev.claim_id, doc.doc_id, result.score, check.threshold, check.provider_id)
        for doc, result in zip(docs, results)
    )
    supported_docs = [doc for doc, j in zip(docs, judgments) if j.label is Label.SUPPORTED]
    supported_entities = tuple(sorted({doc.entity_id for doc in supported_docs}))
    gold_supported = any(doc.is_gold_entity for doc in supported_docs)

    predicted = Label.SUPPORTED if supported_docs else Label.NOT_SUPPORTED
    if human_label is Label.SUPPORTED:
        correct = (
            predicted is Label.SUPPORTED
            and gold_supported
            and gold_entity_id is not None
            and supported_entities == (gold_entity_id,)
        )
    else:
        correct = predicted is Label.NOT_SUPPORTED
    return ClaimEvaluation(
        claim_id=rev.claim_id,
        strategy=rev.strategy,
        judgments=judgments,
        human_label=human_label,
        gold_entity_id=gold_entity_id,
        correct=correct,
        supported_entity_ids=supported_entities,
        gold_supported=gold_supported,
    )


@dataclass(frozen=True)
class AccuracyRow:
    strategy: str
    n: int
    overall: float
    supported_subset: float | None
    not_supported_subset: float | None
    modification_rate: float | None
    length_mean: float
    length_std: float


@dataclass(frozen=True)
class AccuracyTable:
    rows: tuple[AccuracyRow, ...]

    def to_markdown(self) -> str:
        return format_accuracy_table(
            [
                (
                    row.strategy,
                    row.overall,
                    row.supported_subset,
                    row.not_supported_subset,
                    row.modification_rate,
                    (row.length_mean, row.length_std),
                )
                for row in self.rows
            ]
        )

    def to_csv_rows(self) -> list[list[str]]:
        header = [
            "strategy",
            "n",
            "accuracy_overall",
            "accuracy_supported",
            "accuracy_not_supported",
            "modification_rate",
            "length_mean",
            "length_std",
        ]
        body = [
            [
                row.strategy,
                str(row.n),
                f"{row.overall:.6f}",
                "" if row.supported_subset is None else f"{row.supported_subset:.6f}",
                "" if row.not_supported_subset is None else f"{row.not_supported_subset:.6f}",
                "" if row.modification_rate is None else f"{row.modification_rate:.6f}",
                f"{row.length_mean:.6f}",
                f"{row.length_std:.6f}",
            ]
            for row in self.rows
        ]
        return [header, *body]


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def accuracy_report(
    evaluations: Iterable[ClaimEvaluation], revisions: Iterable[RevisedClaim]
) -> AccuracyTable:
    """Per-strategy accuracy, label-subset accuracies, and revision stats.

    The std deviation of revision lengths is the population form.
    """
    revs_by_key = {(rev.strategy, rev.claim_id): rev for rev in revisions}
    by_strategy: dict[str, list[ClaimEvaluation]] = {}
    for evaluation in sorted(evaluations, key=lambda e: (e.strategy.value, e.claim_id)):
        by_strategy.setdefault(evaluation.strategy.value, []).append(evaluation)

    rows = []
    for strategy, group in sorted(by_strategy.items()):
        supported = [e for e in group if e.human_label is Label.SUPPORTED]
        not_supported = [e for e in group if e.human_label is Label.NOT_SUPPORTED]
        strategy_revs = [
            revs_by_key[(Strategy(strategy), e.claim_id)]
            for e in group
            if (Strategy(strategy), e.claim_id) in revs_by_key
        ]
        lengths = [float(rev.word_count) for rev in strategy_revs]
        rows.append(
            AccuracyRow(
                strategy=strategy,
                n=len(group),
                overall=_mean([e.correct for e in group]),
                supported_subset=_mean([e.correct for e in supported]) if supported else None,
                not_supported_subset=(
                    _mean([e.correct for e in not_supported]) if not_supported else None
                ),
                modification_rate=(
                    _mean([rev.modified for rev in strategy_revs]) if strategy_revs else None
                ),
                length_mean=_mean(lengths),
                length_std=statistics.pstdev(lengths) if lengths else 0.0,
            )
        )
    return AccuracyTable(rows=tuple(rows))


@dataclass(frozen=True)
class ErrorRow:
    strategy: str
    n: int
    multi_evidence_matched: float
    single_evidence_wrong_entity: float
    no_evidence_matched: float
    false_support: float

    @property
    def overall(self) -> float:
        return (
            self.multi_evidence_matched
            + self.single_evidence_wrong_entity
            + self.no_evidence_matched
            + self.false_support
        )


@dataclass(frozen=True)
class ErrorTable:
    rows: tuple[ErrorRow, ...]

    def to_markdown(self) -> str:
        return format_error_table(
            [
                (
                    row.strategy,
                    row.multi_evidence_matched,
                    row.single_evidence_wrong_entity,
                    row.no_evidence_matched,
                    row.false_support,
                    row.overall,
                )
                for row in self.rows
            ]
        )

    def to_csv_rows(self) -> list[list[str]]:
        header = [
            "strategy",
            "n",
            "multi_evidence_matched",
            "single_evidence_wrong_entity",
            "no_evidence_matched",
            "false_support",
            "overall",
        ]
        body = [
            [
                row.strategy,
                str(row.n),
                f"{row.multi_evidence_matched:.6f}",
                f"{row.single_evidence_wrong_entity:.6f}",
                f"{row.no_evidence_matched:.6f}",
                f"{row.false_support:.6f}",
                f"{row.overall:.6f}",
            ]
            for row in self.rows
        ]
        return [header, *body]


def error_breakdown(evaluations: Iterable[ClaimEvaluation]) -> ErrorTable:
    """Per-strategy share of the full evaluation set in each error bucket."""
    by_strategy: dict[str, list[ClaimEvaluation]] = {}
    for evaluation in sorted(evaluations, key=lambda e: (e.strategy.value, e.claim_id)):
        by_strategy.setdefault(evaluation.strategy.value, []).append(evaluation)

    rows = []
    for strategy, group in sorted(by_strategy.items()):
        n = len(group)
        counts = {category: 0 for category in ERROR_CATEGORIES}
        for evaluation in group:
            category = evaluation.error_category
            if category is not None:
                counts[category] += 1
        rows.append(
            ErrorRow(
                strategy=strategy,
                n=n,
                multi_evidence_matched=counts[MULTI_EVIDENCE_MATCHED] / n,
                single_evidence_wrong_entity=counts[SINGLE_EVIDENCE_WRONG_ENTITY] / n,
                no_evidence_matched=counts[NO_EVIDENCE_MATCHED] / n,
                false_support=counts[FALSE_SUPPORT] / n,
            )
        )
    return ErrorTable(rows=tuple(rows))


def information_overlap(
    revs_a: Sequence[RevisedClaim],
    revs_b: Sequence[RevisedClaim],
    entail: EntailmentProvider,
) -> float:
    """Fraction of aligned claim pairs that entail each other both ways."""
    a_by_id = {rev.claim_id: rev for rev in revs_a}
    b_by_id = {rev.claim_id: rev for rev in revs_b}
    if set(a_by_id) != set(b_by_id):
        raise ValueError("revision sets must be aligned on claim_id")
    if not a_by_id:
        return 0.0
    equivalent = 0
    for claim_id in sorted(a_by_id):
        text_a, text_b = a_by_id[claim_id].text, b_by_id[claim_id].text
        if (
            entail.entail(text_a, text_b).label == SUPPORTED
            and entail.entail(text_b, text_a).label == SUPPORTED
        ):
            equivalent += 1
    return equivalent / len(a_by_id)


@dataclass(frozen=True)
class SwitchPointRow:
    strategy: str
    offset: int | None  # None marks the strategy's overall reference row
    n: int
    accuracy: float


def switch_point_analysis(
    evaluations: Iterable[ClaimEvaluation],
    claims_by_id: Mapping[str, Any],
    switch_points: Mapping[str, int],
) -> list[SwitchPointRow]:
    """Accuracy bucketed by signed claim offset from the entity switch point.

    ``claims_by_id`` maps claim ids to their atomic claims (for response
    and ordinal lookup); ``switch_points`` maps response ids to the claim
    ordinal where the entity switch happens. Evaluations from responses
    without a switch annotation are excluded; if none remain the analysis
    raises MissingAnnotation. Each strategy also gets an overall reference
    row with offset None.
    """
    annotated: list[tuple[ClaimEvaluation, int]] = []
    for evaluation in sorted(evaluations, key=lambda e: (e.strategy.value, e.claim_id)):
        claim = claims_by_id.get(evaluation.claim_id)
        if claim is None:
            continue
        switch = switch_points.get(claim.response_id)
        if switch is None:
            continue
        annotated.append((evaluation, claim.ordinal - switch))
    if not annotated:
        raise MissingAnnotation("no evaluation belongs to a response with a switch annotation")

    buckets: dict[tuple[str, int], list[bool]] = {}
    overall: dict[str, list[bool]] = {}
    for evaluation, offset in annotated:
        buckets.setdefault((evaluation.strategy.value, offset), []).append(evaluation.correct)
        overall.setdefault(evaluation.strategy.value, []).append(evaluation.correct)

    rows = [
        SwitchPointRow(strategy=strategy, offset=offset, n=len(marks), accuracy=_mean(marks))
        for (strategy, offset), marks in sorted(buckets.items())
    ]
    rows.extend(
        SwitchPointRow(strategy=strategy, offset=None, n=len(marks), accuracy=_mean(marks))
        for strategy, marks in sorted(overall.items())
    )
    return rows


def switch_rows_to_csv(rows: Sequence[SwitchPointRow]) -> list[list[str]]:
    header = ["strategy", "offset", "n", "accuracy"]
    body = [
        [
            row.strategy,
            "ALL" if row.offset is None else str(row.offset),
            str(row.n),
            f"{row.accuracy:.6f}",
        ]
        for row in rows
    ]
    return [header, *body]


# ---------------------------------------------------------------------------
# Table formatting (layout mirrors the published result tables)


def format_accuracy_table(
    rows: Sequence[tuple[str, float, float | None, float | None, float | None, tuple[float, float]]],
) -> str:
    """Accuracy table: percentages at one decimal, lengths as mean +/- std."""
    return markdown_table(
        [
            "Subset",
            "ACCURACY OVERALL",
            "ACCURACY SUPPORTED",
            "ACCURACY NOT_SUPPORTED",
            "MODIFICATION RATE",
            "AVG LENGTH (# of words)",
        ],
        [
            [
                label,
                format_percent(overall, 1),
                format_percent(supported, 1),
                format_percent(not_supported, 1),
                format_percent(modification, 1),
                format_length(*length),
            ]
            for label, overall, supported, not_supported, modification, length in rows
        ],
    )


def format_error_table(
    rows: Sequence[tuple[str, float, float, float, float, float]],
) -> str:
    """Error breakdown table: four category columns plus their sum."""
    return markdown_table(
        [
            "Baseline",
            "Multi-Evidence matched",
            "Single-Evidence Wrong Entity",
            "No Evidence matched",
            "Single/Multiple Evidence matched",
            "Overall",
        ],
        [
            [
                label,
                format_percent(multi, 1),
                format_percent(single_wrong, 1),
                format_percent(no_evidence, 1),
                format_percent(false_support, 1),
                format_percent(overall, 1),
            ]
            for label, multi, single_wrong, no_evidence, false_support, overall in rows
        ],
    )


def format_overlap_table(rows: Sequence[tuple[str, float]]) -> str:
    """Pairwise information-overlap table: whole-number percentages."""
    return markdown_table(
        ["Baseline Pair", "Overlap"],
        [[label, format_percent(value, 0)] for label, value in rows],
    )
