"""Shared domain model for the claim-verification pipeline.

Every stage exchanges the immutable value types defined here. Each type
maps onto a flat JSON record (one object per line in corpus files);
``to_record`` / ``from_record`` are exact inverses so that any corpus can
round-trip through disk without loss.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping

from .errors import ParseError

_WS_RUN = re.compile(r"\s+")


class Label(str, Enum):
    """Closed two-value label set for human annotation and verification output."""

    SUPPORTED = "SUPPORTED"
    NOT_SUPPORTED = "NOT_SUPPORTED"


class Strategy(str, Enum):
    """The four claim-revision strategies."""

    ATOMIC = "ATOMIC"
    SIMPLE = "SIMPLE"
    SAFE = "SAFE"
    MOLECULAR = "MOLECULAR"


def normalize_text(raw: str) -> str:
    """Collapse whitespace runs to single spaces and trim the ends.

    Case and punctuation are preserved; the function is idempotent.
    """
    return _WS_RUN.sub(" ", raw).strip()


def count_words(text: str) -> int:
    """Number of whitespace-delimited tokens after normalization."""
    normalized = normalize_text(text)
    return len(normalized.split(" ")) if normalized else 0


def comparable_text(text: str) -> str:
    """Normalized text with trailing sentence terminators stripped.

    Used wherever two claims are compared for containment, so that a
    final period does not defeat an otherwise exact substring relation.
    """
    return normalize_text(text).rstrip(".!?").rstrip()


def derive_seed(seed: int, *parts: str) -> int:
    """Derive a named substream seed from the single run seed."""
    material = "|".join([str(seed), *parts]).encode("utf-8")
    return int.from_bytes(hashlib.sha256(material).digest()[:8], "big")


def _require(record: Mapping[str, Any], field: str) -> Any:
    if field not in record:
        raise KeyError(field)
    return record[field]


@dataclass(frozen=True)
class ModelResponse:
    """An input prompt plus the long-form generation to be fact-checked."""

    response_id: str
    prompt: str
    text: str
    source: str = ""

    def __post_init__(self) -> None:
        if not self.response_id:
            raise ValueError("response_id must be non-empty")
        if not normalize_text(self.text):
            raise ValueError("response text must be non-empty")

    def to_record(self) -> dict[str, Any]:
        return {
            "response_id": self.response_id,
            "prompt": self.prompt,
            "text": self.text,
            "source": self.source,
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "ModelResponse":
        return cls(
            response_id=str(_require(record, "response_id")),
            prompt=str(_require(record, "prompt")),
            text=str(_require(record, "text")),
            source=str(record.get("source") or ""),
        )


@dataclass(frozen=True)
class AtomicClaim:
    """One decomposed checkable unit of a response."""

    claim_id: str
    response_id: str
    text: str
    ordinal: int
    human_label: Label | None = None
    subject_hint: str | None = None

    def __post_init__(self) -> None:
        if not self.claim_id:
            raise ValueError("claim_id must be non-empty")
        if self.ordinal < 0:
            raise ValueError("ordinal must be >= 0")
        if not normalize_text(self.text):
            raise ValueError("claim text must be non-empty")

    def to_record(self) -> dict[str, Any]:
        return {
            "claim_id": self.claim_id,
            "response_id": self.response_id,
            "text": self.text,
            "ordinal": self.ordinal,
            "human_label": self.human_label.value if self.human_label else None,
            "subject_hint": self.subject_hint,
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "AtomicClaim":
        raw_label = record.get("human_label")
        return cls(
            claim_id=str(_require(record, "claim_id")),
            response_id=str(_require(record, "response_id")),
            text=str(_require(record, "text")),
            ordinal=int(_require(record, "ordinal")),
            human_label=Label(raw_label) if raw_label is not None else None,
            subject_hint=record.get("subject_hint"),
        )


@dataclass(frozen=True)
class DisambiguationCriteria:
    """Either no disambiguation needed, or a free-text category such as
    ``profession``, ``birthyear``, or ``location``."""

    value: str | None = None

    def __post_init__(self) -> None:
        if self.value is not None:
            stripped = self.value.strip()
            if not stripped:
                raise ValueError("criteria category must be non-empty or None")
            object.__setattr__(self, "value", stripped)

    @property
    def is_none(self) -> bool:
        return self.value is None

    @classmethod
    def none(cls) -> "DisambiguationCriteria":
        return cls(None)

    @classmethod
    def of(cls, category: str) -> "DisambiguationCriteria":
        return cls(category)

    @classmethod
    def from_raw(cls, raw: Any) -> "DisambiguationCriteria":
        """Lenient parse of model output: null, "", "none" and "null" all
        mean no disambiguation is required."""
        if raw is None:
            return cls.none()
        text = str(raw).strip()
        if not text or text.lower() in ("none", "null", "n/a"):
            return cls.none()
        return cls(text)


@dataclass(frozen=True)
class RevisedClaim:
    """A strategy-tagged rewrite of an atomic claim."""

    claim_id: str
    strategy: Strategy
    text: str
    subject: str | None
    criteria: DisambiguationCriteria
    modified: bool
    word_count: int

    def __post_init__(self) -> None:
        if not normalize_text(self.text):
            raise ValueError("revised text must be non-empty")
        if self.word_count != count_words(self.text):
            raise ValueError("word_count must equal the whitespace token count")
        if self.strategy is Strategy.ATOMIC and self.modified:
            raise ValueError("ATOMIC revisions are never modified")

    @classmethod
    def from_source(
        cls,
        source: AtomicClaim,
        strategy: Strategy,
        text: str,
        subject: str | None = None,
        criteria: DisambiguationCriteria | None = None,
    ) -> "RevisedClaim":
        """Build a revision, deriving the modified flag and word count."""
        modified = normalize_text(text) != normalize_text(source.text)
        if strategy is Strategy.ATOMIC and modified:
            raise ValueError("ATOMIC strategy must preserve the claim text")
        return cls(
            claim_id=source.claim_id,
            strategy=strategy,
            text=text,
            subject=subject,
            criteria=criteria or DisambiguationCriteria.none(),
            modified=modified,
            word_count=count_words(text),
        )

    def to_record(self) -> dict[str, Any]:
        return {
            "claim_id": self.claim_id,
            "strategy": self.strategy.value,
            "text": self.text,
            "subject": self.subject,
            "criteria": self.criteria.value,
            "modified": self.modified,
            "word_count": self.word_count,
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "RevisedClaim":
        return cls(
            claim_id=str(_require(record, "claim_id")),
            strategy=Strategy(_require(record, "strategy")),
            text=str(_require(record, "text")),
            subject=record.get("subject"),
            criteria=DisambiguationCriteria(record.get("criteria")),
            modified=bool(_require(record, "modified")),
            word_count=int(_require(record, "word_count")),
        )


@dataclass(frozen=True)
class EvidenceDocument:
    """One evidence text, tagged with the entity it describes."""

    doc_id: str
    entity_id: str
    text: str
    is_gold_entity: bool = False
    claim_scope: str = ""

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")
        if not normalize_text(self.text):
            raise ValueError("document text must be non-empty")

    def to_record(self) -> dict[str, Any]:
        return {
            "doc_id": self.doc_id,
            "entity_id": self.entity_id,
            "text": self.text,
            "is_gold_entity": self.is_gold_entity,
            "claim_scope": self.claim_scope,
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "EvidenceDocument":
        return cls(
            doc_id=str(_require(record, "doc_id")),
            entity_id=str(_require(record, "entity_id")),
            text=str(_require(record, "text")),
            is_gold_entity=bool(record.get("is_gold_entity", False)),
            claim_scope=str(record.get("claim_scope") or ""),
        )


@dataclass(frozen=True)
class Judgment:
    """The verification outcome for one (claim, document) pair."""

    claim_id: str
    doc_id: str
    label: Label
    score: float
    threshold: float
    provider_id: str

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("score must be in [0, 1]")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must be in [0, 1]")
        expected = Label.SUPPORTED if self.score >= self.threshold else Label.NOT_SUPPORTED
        if self.label is not expected:
            raise ValueError("label must be SUPPORTED iff score >= threshold")

    @classmethod
    def from_score(
        cls, claim_id: str, doc_id: str, score: float, threshold: float, provider_id: str
    ) -> "Judgment":
        label = Label.SUPPORTED if score >= threshold else Label.NOT_SUPPORTED
        return cls(claim_id, doc_id, label, score, threshold, provider_id)

    def to_record(self) -> dict[str, Any]:
        return {
            "claim_id": self.claim_id,
            "doc_id": self.doc_id,
            "label": self.label.value,
            "score": self.score,
            "threshold": self.threshold,
            "provider_id": self.provider_id,
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "Judgment":
        return cls(
            claim_id=str(_require(record, "claim_id")),
            doc_id=str(_require(record, "doc_id")),
            label=Label(_require(record, "label")),
            score=float(_require(record, "score")),
            threshold=float(_require(record, "threshold")),
            provider_id=str(_require(record, "provider_id")),
        )


def dump_record(record: Mapping[str, Any]) -> str:
    """Canonical single-line JSON used for every record this package writes."""
    return json.dumps(record, sort_keys=True, ensure_ascii=False)


def write_jsonl(path: str | Path, records: Iterable[Mapping[str, Any]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for record in records:
            handle.write(dump_record(record))
            handle.write("\n")


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict[str, Any]]]:
    """Yield (line_number, record) pairs; line numbers start at 1."""
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                record = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise ParseError(line_number, str(exc)) from exc
            if not isinstance(record, dict):
                raise ParseError(line_number, "record is not a JSON object")
            yield line_number, record
