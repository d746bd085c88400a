"""User-facing entry points: ingestion, run configuration, and pipelines.

Subcommands mirror the pipeline's stage boundaries (decompose, revise,
minimality, ambig-eval, overlap, report, cache) so partial reruns stay
cheap. Every provider-using run writes a manifest recording the config
hash, template hashes, and replay-store hash; given the same corpus,
config, and replay store, reruns are byte-identical.
"""

from __future__ import annotations

import json
import logging
import os
import random
from contextlib import contextmanager
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Iterator, Mapping, Sequence

import click

from . import ambigeval, decontext, minimality, prompts
from .core import (
    AtomicClaim,
    EvidenceDocument,
    Label,
    ModelResponse,
    RevisedClaim,
    Strategy,
    derive_seed,
    read_jsonl,
    write_jsonl,
)
from .decomposition import extract_atomic_facts
from .errors import (
    ClaimkitError,
    EmptyKeys,
    GenerationLeak,
    MalformedResponse,
    ReplayMiss,
    RunLocked,
    SchemaError,
)
from .providers import (
    CheckProvider,
    ChatProvider,
    EntailmentProvider,
    HttpChatProvider,
    HttpCheckProvider,
    HttpEntailmentProvider,
    PromptRunner,
    RecordingChatProvider,
    RecordingCheckProvider,
    RecordingEntailmentProvider,
    ReplayChatProvider,
    ReplayCheckProvider,
    ReplayEntailmentProvider,
    ReplayStore,
    fan_out,
    request_hash,
)
from .tables import write_csv

logger = logging.getLogger("claimkit")

REPLAY_ONLY = "replay-only"
LIVE_RECORD = "live-record"


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; hashable so manifests can pin it."""

    seed: int
    temperature: float = 0.75
    model_tag: str = "unspecified"
    strategies: tuple[str, ...] = ("ATOMIC", "SIMPLE", "SAFE", "MOLECULAR")
    cache_mode: str = REPLAY_ONLY
    store_path: str = ""
    chat_endpoint: str | None = None
    entail_endpoint: str | None = None
    check_endpoint: str | None = None
    token_env: str = "CLAIMKIT_API_TOKEN"
    check_threshold: float = 0.5
    entailment_threshold: float = 0.5
    concurrency: int = 4
    skip_stage2_on_none: bool = False
    evidence_retries: int = 1

    def __post_init__(self) -> None:
        if self.cache_mode not in (REPLAY_ONLY, LIVE_RECORD):
            raise ValueError(f"unknown cache_mode: {self.cache_mode}")
        if not self.store_path:
            raise ValueError("store_path is required")
        if self.cache_mode == LIVE_RECORD:
            missing = [
                name
                for name, value in (
                    ("chat_endpoint", self.chat_endpoint),
                    ("entail_endpoint", self.entail_endpoint),
                    ("check_endpoint", self.check_endpoint),
                )
                if not value
            ]
            if missing:
                raise ValueError(f"live-record mode requires endpoints: {', '.join(missing)}")
        for strategy in self.strategies:
            Strategy(strategy)

    def strategy_set(self) -> list[Strategy]:
        return [Strategy(name) for name in self.strategies]

    def to_mapping(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "temperature": self.temperature,
            "model_tag": self.model_tag,
            "strategies": list(self.strategies),
            "cache_mode": self.cache_mode,
            "store_path": self.store_path,
            "chat_endpoint": self.chat_endpoint,
            "entail_endpoint": self.entail_endpoint,
            "check_endpoint": self.check_endpoint,
            "token_env": self.token_env,
            "check_threshold": self.check_threshold,
            "entailment_threshold": self.entailment_threshold,
            "concurrency": self.concurrency,
            "skip_stage2_on_none": self.skip_stage2_on_none,
            "evidence_retries": self.evidence_retries,
        }

    def config_hash(self) -> str:
        return request_hash({"kind": "run-config", **self.to_mapping()})

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise SchemaError(sorted(unknown)[0], detail="unknown config key")
        if "seed" not in mapping:
            raise SchemaError("seed", detail="run seed is mandatory")
        kwargs = dict(mapping)
        if "strategies" in kwargs:
            kwargs["strategies"] = tuple(kwargs["strategies"])
        return cls(**kwargs)


def load_config(path: str | Path, **overrides: Any) -> RunConfig:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_mapping(raw)


@dataclass(frozen=True)
class Providers:
    chat: ChatProvider | None
    entail: EntailmentProvider
    check: CheckProvider
    store: ReplayStore

    def runner(self, config: RunConfig) -> PromptRunner:
        if self.chat is None:
            raise ValueError("no chat provider configured")
        return PromptRunner(
            chat=self.chat,
            temperature=config.temperature,
            seed=config.seed,
            model_tag=config.model_tag,
        )


def build_providers(config: RunConfig) -> Providers:
    store = ReplayStore(config.store_path)
    if config.cache_mode == REPLAY_ONLY:
        return Providers(
            chat=ReplayChatProvider(store),
            entail=ReplayEntailmentProvider(store, config.entailment_threshold),
            check=ReplayCheckProvider(store, config.check_threshold),
            store=store,
        )
    chat = HttpChatProvider(config.chat_endpoint or "", token_env=config.token_env)
    entail = HttpEntailmentProvider(
        config.entail_endpoint or "", threshold=config.entailment_threshold, token_env=config.token_env
    )
    check = HttpCheckProvider(
        config.check_endpoint or "", threshold=config.check_threshold, token_env=config.token_env
    )
    return Providers(
        chat=RecordingChatProvider(chat, store),
        entail=RecordingEntailmentProvider(entail, store),
        check=RecordingCheckProvider(check, store),
        store=store,
    )


# ---------------------------------------------------------------------------
# Corpus ingestion


@dataclass(frozen=True)
class FactcheckCorpus:
    pairs: tuple[tuple[ModelResponse, tuple[AtomicClaim, ...]], ...]
    dropped_label_count: int

    @property
    def claims(self) -> list[AtomicClaim]:
        return [claim for _response, claims in self.pairs for claim in claims]

    @property
    def responses(self) -> list[ModelResponse]:
        return [response for response, _claims in self.pairs]


def ingest_factcheck_corpus(path: str | Path) -> FactcheckCorpus:
    """Load a fact-checking corpus of responses with nested claims.

    One JSON object per line: the response record plus a ``claims`` list
    of claim records. Claims whose human label falls outside the two
    supported values are dropped and counted.
    """
    pairs = []
    dropped = 0
    seen_responses: set[str] = set()
    seen_claims: set[str] = set()
    for line_number, record in read_jsonl(path):
        try:
            response = ModelResponse.from_record(record)
        except KeyError as exc:
            raise SchemaError(exc.args[0], line_number) from exc
        except ValueError as exc:
            raise SchemaError("text", line_number, str(exc)) from exc
        if response.response_id in seen_responses:
            raise SchemaError("response_id", line_number, "duplicate response_id")
        seen_responses.add(response.response_id)
        claims = []
        for raw_claim in record.get("claims", []):
            label = raw_claim.get("human_label")
            if label is not None and label not in (Label.SUPPORTED.value, Label.NOT_SUPPORTED.value):
                dropped += 1
                continue
            try:
                claim = AtomicClaim.from_record(raw_claim)
            except KeyError as exc:
                raise SchemaError(exc.args[0], line_number) from exc
            except ValueError as exc:
                raise SchemaError("claims", line_number, str(exc)) from exc
            if claim.response_id != response.response_id:
                raise SchemaError("response_id", line_number, "claim does not reference its response")
            if claim.claim_id in seen_claims:
                raise SchemaError("claim_id", line_number, "duplicate claim_id")
            seen_claims.add(claim.claim_id)
            claims.append(claim)
        ordinals = [claim.ordinal for claim in claims]
        if any(b <= a for a, b in zip(ordinals, ordinals[1:])):
            raise SchemaError("ordinal", line_number, "ordinals must be strictly increasing")
        pairs.append((response, tuple(claims)))
    if dropped:
        logger.info("ingest: dropped %d claims with out-of-scope labels", dropped)
    return FactcheckCorpus(pairs=tuple(pairs), dropped_label_count=dropped)


@dataclass(frozen=True)
class AmbigCorpus:
    responses: tuple[ModelResponse, ...]
    claims: tuple[AtomicClaim, ...]
    documents: tuple[EvidenceDocument, ...]
    gold_by_claim: Mapping[str, str]
    switch_points: Mapping[str, int]
    dropped_label_count: int

    def response_by_id(self, response_id: str) -> ModelResponse:
        for response in self.responses:
            if response.response_id == response_id:
                return response
        raise KeyError(response_id)

    def docs_for_claim(self, claim: AtomicClaim) -> list[EvidenceDocument]:
        """Materialize the claim's evidence set with per-claim gold flags."""
        gold_entity = self.gold_by_claim.get(claim.claim_id)
        docs = [
            doc
            for doc in self.documents
            if not doc.claim_scope or doc.claim_scope in (claim.response_id, claim.claim_id)
        ]
        return [
            EvidenceDocument(
                doc_id=doc.doc_id,
                entity_id=doc.entity_id,
                text=doc.text,
                is_gold_entity=(doc.entity_id == gold_entity),
                claim_scope=claim.claim_id,
            )
            for doc in docs
        ]


def ingest_ambig_corpus(path: str | Path) -> AmbigCorpus:
    """Load an ambiguous-entities dataset directory.

    Expects ``claims.jsonl`` ({claim_id, text, human_label, gold_entity_id,
    response_id}), ``documents.jsonl`` ({doc_id, entity_id, text} plus an
    optional claim_scope and is_gold_entity), ``responses.jsonl`` for the
    generation context, and optionally ``switch_points.jsonl``
    ({response_id, switch_index}).
    """
    root = Path(path)
    responses = []
    for line_number, record in read_jsonl(root / "responses.jsonl"):
        try:
            responses.append(ModelResponse.from_record(record))
        except KeyError as exc:
            raise SchemaError(exc.args[0], line_number) from exc

    claims: list[AtomicClaim] = []
    gold_by_claim: dict[str, str] = {}
    dropped = 0
    per_response_ordinal: dict[str, int] = {}
    for line_number, record in read_jsonl(root / "claims.jsonl"):
        label = record.get("human_label")
        if label not in (Label.SUPPORTED.value, Label.NOT_SUPPORTED.value):
            dropped += 1
            continue
        for required in ("claim_id", "text", "response_id", "gold_entity_id"):
            if required not in record:
                raise SchemaError(required, line_number)
        response_id = str(record["response_id"])
        ordinal = record.get("ordinal")
        if ordinal is None:
            ordinal = per_response_ordinal.get(response_id, 0)
        per_response_ordinal[response_id] = int(ordinal) + 1
        claim = AtomicClaim(
            claim_id=str(record["claim_id"]),
            response_id=response_id,
            text=str(record["text"]),
            ordinal=int(ordinal),
            human_label=Label(label),
            subject_hint=record.get("subject_hint"),
        )
        if claim.claim_id in gold_by_claim:
            raise SchemaError("claim_id", line_number, "duplicate claim_id")
        claims.append(claim)
        gold_by_claim[claim.claim_id] = str(record["gold_entity_id"])

    documents = []
    gold_flags_by_scope: dict[str, set[str]] = {}
    for line_number, record in read_jsonl(root / "documents.jsonl"):
        try:
            doc = EvidenceDocument.from_record(record)
        except KeyError as exc:
            raise SchemaError(exc.args[0], line_number) from exc
        if doc.is_gold_entity:
            flagged = gold_flags_by_scope.setdefault(doc.claim_scope, set())
            flagged.add(doc.entity_id)
            if len(flagged) > 1:
                raise SchemaError("is_gold_entity", line_number, "more than one gold entity in scope")
        documents.append(doc)

    switch_points: dict[str, int] = {}
    switch_path = root / "switch_points.jsonl"
    if switch_path.exists():
        for line_number, record in read_jsonl(switch_path):
            for required in ("response_id", "switch_index"):
                if required not in record:
                    raise SchemaError(required, line_number)
            switch_points[str(record["response_id"])] = int(record["switch_index"])

    if dropped:
        logger.info("ingest: dropped %d claims with out-of-scope labels", dropped)
    return AmbigCorpus(
        responses=tuple(responses),
        claims=tuple(claims),
        documents=tuple(documents),
        gold_by_claim=gold_by_claim,
        switch_points=switch_points,
        dropped_label_count=dropped,
    )


def sample_claims(claims: Sequence[AtomicClaim], size: int, seed: int) -> list[AtomicClaim]:
    """Seeded reproducible sample, drawn through the corpus-sampling substream."""
    if size >= len(claims):
        return list(claims)
    rng = random.Random(derive_seed(seed, "corpus-sample"))
    ordered = sorted(claims, key=lambda claim: claim.claim_id)
    chosen = rng.sample(ordered, size)
    return sorted(chosen, key=lambda claim: claim.claim_id)


# ---------------------------------------------------------------------------
# Stage runners (shared by the CLI commands and by tests)


def run_revise(
    config: RunConfig,
    pairs: Sequence[tuple[ModelResponse, Sequence[AtomicClaim]]],
    providers: Providers,
) -> list[RevisedClaim]:
    """Produce every configured strategy's revision for every claim.

    Independent claims are revised concurrently; the two stages of a
    molecular revision stay sequential inside each claim's task.
    """
    runner = providers.runner(config) if providers.chat is not None else None
    revisions = []
    for strategy in config.strategy_set():
        for response, claims in pairs:

            def revise_one(claim: AtomicClaim) -> RevisedClaim:
                return decontext.revise(
                    claim,
                    response,
                    strategy,
                    runner,
                    skip_stage2_on_none=config.skip_stage2_on_none,
                )

            revisions.extend(fan_out(revise_one, list(claims), config.concurrency))
    revisions.sort(key=lambda rev: (rev.strategy.value, rev.claim_id))
    return revisions


def run_minimality(
    config: RunConfig,
    pairs: Sequence[tuple[ModelResponse, Sequence[AtomicClaim]]],
    revisions: Sequence[RevisedClaim],
    providers: Providers,
) -> tuple[list[minimality.MinimalityVerdict], list[tuple[str, str, str]]]:
    """Run the full controlled-evidence audit over the given revisions.

    Returns the classified verdicts plus (claim_id, strategy, reason)
    drop records for cases abandoned mid-pipeline.
    """
    runner = providers.runner(config)
    claims_by_response = {response.response_id: list(claims) for response, claims in pairs}
    claims_by_id = {claim.claim_id: claim for _r, claims in pairs for claim in claims}

    def audit_one(revision: RevisedClaim):
        if revision.strategy is Strategy.ATOMIC:
            return None  # the audit targets decontextualizations
        source = claims_by_id.get(revision.claim_id)
        if source is None:
            return None
        response_claims = claims_by_response[source.response_id]
        record = minimality.find_multifact(revision, response_claims, providers.entail)
        if record is None:
            return None
        case_seed = derive_seed(config.seed, "banned", revision.strategy.value, revision.claim_id)
        try:
            banned, keys = minimality.sample_banned_and_keys(
                record, response_claims, case_seed, providers.entail
            )
            article = minimality.generate_partial_evidence(
                keys, banned, runner, providers.check, max_retries=config.evidence_retries
            )
        except (EmptyKeys, GenerationLeak, MalformedResponse) as exc:
            return ("drop", (revision.claim_id, revision.strategy.value, type(exc).__name__))
        case = minimality.PartialEvidenceCase(
            record=record,
            banned_fact=banned,
            key_facts=tuple(keys),
            evidence_text=article,
            seed=case_seed,
        )
        return ("verdict", minimality.classify_case(case, providers.check))

    ordered = sorted(revisions, key=lambda rev: (rev.strategy.value, rev.claim_id))
    outcomes = fan_out(audit_one, ordered, config.concurrency)
    verdicts = [payload for outcome, payload in filter(None, outcomes) if outcome == "verdict"]
    drops = [payload for outcome, payload in filter(None, outcomes) if outcome == "drop"]
    return verdicts, drops


def run_ambig_eval(
    config: RunConfig,
    corpus: AmbigCorpus,
    revisions: Sequence[RevisedClaim],
    providers: Providers,
) -> list[ambigeval.ClaimEvaluation]:
    """Judge every revision against its claim's evidence set, concurrently."""
    claims_by_id = {claim.claim_id: claim for claim in corpus.claims}
    ordered = [
        (revision, claims_by_id[revision.claim_id])
        for revision in sorted(revisions, key=lambda rev: (rev.strategy.value, rev.claim_id))
        if revision.claim_id in claims_by_id
        and claims_by_id[revision.claim_id].human_label is not None
    ]

    def judge_one(item: tuple[RevisedClaim, AtomicClaim]) -> ambigeval.ClaimEvaluation:
        revision, claim = item
        docs = corpus.docs_for_claim(claim)
        return ambigeval.judge_claim(revision, docs, claim.human_label, providers.check)

    return fan_out(judge_one, ordered, config.concurrency)


def run_overlap(
    revisions: Sequence[RevisedClaim],
    pairs: Sequence[tuple[Strategy, Strategy]],
    entail: EntailmentProvider,
) -> list[tuple[str, float]]:
    by_strategy: dict[Strategy, list[RevisedClaim]] = {}
    for revision in revisions:
        by_strategy.setdefault(revision.strategy, []).append(revision)
    rows = []
    for left, right in pairs:
        fraction = ambigeval.information_overlap(
            by_strategy.get(left, []), by_strategy.get(right, []), entail
        )
        rows.append((f"{left.value} & {right.value}", fraction))
    return rows


# ---------------------------------------------------------------------------
# Output tree


@contextmanager
def output_lock(out_dir: Path) -> Iterator[None]:
    """One run at a time per output directory."""
    out_dir.mkdir(parents=True, exist_ok=True)
    lock_path = out_dir / ".lock"
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise RunLocked(f"output directory is locked by {lock_path}") from None
    try:
        os.write(fd, str(os.getpid()).encode("ascii"))
        os.close(fd)
        yield
    finally:
        lock_path.unlink(missing_ok=True)


def write_manifest(out_dir: Path, config: RunConfig, store: ReplayStore) -> None:
    manifest = {
        "config_hash": config.config_hash(),
        "template_hashes": prompts.all_template_hashes(),
        "replay_store_hash": store.store_hash(),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def write_minimality_outputs(
    out_dir: Path,
    verdicts: Sequence[minimality.MinimalityVerdict],
    drops: Sequence[tuple[str, str, str]],
    corpus_size: int,
) -> None:
    write_jsonl(out_dir / "verdicts.jsonl", [v.to_record() for v in verdicts])
    write_jsonl(
        out_dir / "drops.jsonl",
        [
            {"claim_id": claim_id, "strategy": strategy, "reason": reason}
            for claim_id, strategy, reason in sorted(drops)
        ],
    )
    report = minimality.minimality_report(verdicts, corpus_size, drops)
    reports = out_dir / "reports"
    reports.mkdir(parents=True, exist_ok=True)
    (reports / "minimality_rates.md").write_text(report.to_markdown(), encoding="utf-8")
    write_csv(reports / "minimality_rates.csv", report.to_csv_rows())


def write_ambig_outputs(
    out_dir: Path,
    evaluations: Sequence[ambigeval.ClaimEvaluation],
    revisions: Sequence[RevisedClaim],
) -> None:
    ordered = sorted(evaluations, key=lambda e: (e.strategy.value, e.claim_id))
    write_jsonl(out_dir / "judgments.jsonl", [e.to_record() for e in ordered])
    accuracy = ambigeval.accuracy_report(ordered, revisions)
    errors = ambigeval.error_breakdown(ordered)
    reports = out_dir / "reports"
    reports.mkdir(parents=True, exist_ok=True)
    (reports / "accuracy.md").write_text(accuracy.to_markdown(), encoding="utf-8")
    write_csv(reports / "accuracy.csv", accuracy.to_csv_rows())
    (reports / "errors.md").write_text(errors.to_markdown(), encoding="utf-8")
    write_csv(reports / "errors.csv", errors.to_csv_rows())


def load_revisions(path: str | Path) -> list[RevisedClaim]:
    return [RevisedClaim.from_record(record) for _line, record in read_jsonl(path)]


def load_evaluations(path: str | Path) -> list[ambigeval.ClaimEvaluation]:
    return [ambigeval.ClaimEvaluation.from_record(record) for _line, record in read_jsonl(path)]


def load_verdicts(path: str | Path) -> list[minimality.MinimalityVerdict]:
    return [minimality.MinimalityVerdict.from_record(record) for _line, record in read_jsonl(path)]


def load_minimality_annotations(path: str | Path) -> list[dict[str, Any]]:
    """Human minimal/non-minimal adjudications, one JSON object per line."""
    annotations = []
    for line_number, record in read_jsonl(path):
        for required in ("claim_id", "strategy", "human_minimality_label"):
            if required not in record:
                raise SchemaError(required, line_number)
        label = str(record["human_minimality_label"]).strip().lower()
        if label not in ("minimal", "non-minimal"):
            raise SchemaError("human_minimality_label", line_number, f"unknown label {label!r}")
        annotations.append(record)
    return annotations


# ---------------------------------------------------------------------------
# Command-line interface


def _fail(error: ClaimkitError) -> "SystemExit":
    summary: dict[str, Any] = {"error": type(error).__name__, "detail": str(error)}
    if isinstance(error, ReplayMiss):
        summary["request_hash"] = error.request_hash
    if isinstance(error, SchemaError):
        summary["field"] = error.field
        summary["line_number"] = error.line_number
    click.echo(json.dumps(summary, sort_keys=True), err=True)
    return SystemExit(1)


def _config_from_options(
    config_path: str | None,
    seed: int | None,
    replay_only: bool,
    record: bool,
    store: str | None,
    strategies: str | None,
    concurrency: int | None,
    temperature: float | None,
    model_tag: str | None,
) -> RunConfig:
    overrides: dict[str, Any] = {}
    if seed is not None:
        overrides["seed"] = seed
    if store:
        overrides["store_path"] = store
    if strategies:
        overrides["strategies"] = tuple(s.strip().upper() for s in strategies.split(",") if s.strip())
    if concurrency is not None:
        overrides["concurrency"] = concurrency
    if temperature is not None:
        overrides["temperature"] = temperature
    if model_tag:
        overrides["model_tag"] = model_tag
    if replay_only:
        overrides["cache_mode"] = REPLAY_ONLY
    elif record:
        overrides["cache_mode"] = LIVE_RECORD
    if config_path:
        return load_config(config_path, **overrides)
    if "seed" not in overrides:
        raise SchemaError("seed", detail="run seed is mandatory (pass --seed or a config file)")
    return RunConfig.from_mapping(overrides)


def _common_options(command):
    decorators = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None),
        click.option("--seed", type=int, default=None, help="Run seed (mandatory)."),
        click.option("--replay-only", is_flag=True, default=False, help="Never call upstream providers."),
        click.option("--record", is_flag=True, default=False, help="Call live providers, record everything."),
        click.option("--store", type=click.Path(file_okay=False), default=None, help="Replay store directory."),
        click.option("--strategies", default=None, help="Comma-separated strategy names."),
        click.option("--concurrency", type=int, default=None),
        click.option("--temperature", type=float, default=None),
        click.option("--model-tag", default=None),
    ]
    for decorator in reversed(decorators):
        command = decorator(command)
    return command


@click.group()
def cli() -> None:
    """Claim decomposition, revision, and verification toolkit."""


@cli.command()
@_common_options
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def decompose(corpus, out_dir, **options):
    """Extract atomic claims from every response in a corpus."""
    try:
        config = _config_from_options(**options)
        ingested = ingest_factcheck_corpus(corpus)
        providers = build_providers(config)
        runner = providers.runner(config)
        out = Path(out_dir)
        with output_lock(out):
            claims = []
            for response in ingested.responses:
                claims.extend(
                    extract_atomic_facts(response, runner, max_workers=config.concurrency)
                )
            write_jsonl(out / "claims.jsonl", [claim.to_record() for claim in claims])
            write_manifest(out, config, providers.store)
        click.echo(f"decomposed {len(ingested.responses)} responses into {len(claims)} claims")
    except ClaimkitError as error:
        raise _fail(error)


@cli.command()
@_common_options
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def revise(corpus, out_dir, **options):
    """Rewrite every claim with each configured strategy."""
    try:
        config = _config_from_options(**options)
        ingested = ingest_factcheck_corpus(corpus)
        providers = build_providers(config)
        out = Path(out_dir)
        with output_lock(out):
            revisions = run_revise(config, ingested.pairs, providers)
            write_jsonl(out / "revisions.jsonl", [rev.to_record() for rev in revisions])
            write_manifest(out, config, providers.store)
        click.echo(
            f"revised {len(ingested.claims)} claims "
            f"({len(ingested.pairs)} responses, {len(config.strategies)} strategies, "
            f"{ingested.dropped_label_count} claims dropped at ingest)"
        )
    except ClaimkitError as error:
        raise _fail(error)


@cli.command("minimality")
@_common_options
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--revisions", "revisions_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def minimality_cmd(corpus, revisions_path, out_dir, **options):
    """Run the controlled minimality audit over stored revisions."""
    try:
        config = _config_from_options(**options)
        ingested = ingest_factcheck_corpus(corpus)
        providers = build_providers(config)
        out = Path(out_dir)
        with output_lock(out):
            if revisions_path:
                revisions = load_revisions(revisions_path)
            else:
                revisions = run_revise(config, ingested.pairs, providers)
                write_jsonl(out / "revisions.jsonl", [rev.to_record() for rev in revisions])
            wanted = set(config.strategy_set())
            revisions = [rev for rev in revisions if rev.strategy in wanted]
            verdicts, drops = run_minimality(config, ingested.pairs, revisions, providers)
            write_minimality_outputs(out, verdicts, drops, corpus_size=len(ingested.claims))
            write_manifest(out, config, providers.store)
        click.echo(
            f"classified {len(verdicts)} cases over {len(ingested.claims)} claims "
            f"({len(drops)} dropped)"
        )
    except ClaimkitError as error:
        raise _fail(error)


@cli.command("ambig-eval")
@_common_options
@click.option("--dataset", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--revisions", "revisions_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--sample", type=int, default=None, help="Seeded subsample of claims.")
@click.option("--switch-analysis", is_flag=True, default=False)
def ambig_eval(dataset, revisions_path, out_dir, sample, switch_analysis, **options):
    """Judge revised claims against multi-entity evidence sets."""
    try:
        config = _config_from_options(**options)
        corpus = ingest_ambig_corpus(dataset)
        providers = build_providers(config)
        out = Path(out_dir)
        with output_lock(out):
            claims = list(corpus.claims)
            if sample is not None:
                claims = sample_claims(claims, sample, config.seed)
                corpus = replace(corpus, claims=tuple(claims))
            pairs = [
                (corpus.response_by_id(response_id), [c for c in claims if c.response_id == response_id])
                for response_id in sorted({claim.response_id for claim in claims})
            ]
            if revisions_path:
                revisions = load_revisions(revisions_path)
            else:
                revisions = run_revise(config, pairs, providers)
                write_jsonl(out / "revisions.jsonl", [rev.to_record() for rev in revisions])
            wanted = set(config.strategy_set())
            revisions = [rev for rev in revisions if rev.strategy in wanted]
            evaluations = run_ambig_eval(config, corpus, revisions, providers)
            write_ambig_outputs(out, evaluations, revisions)
            if switch_analysis:
                claims_by_id = {claim.claim_id: claim for claim in corpus.claims}
                rows = ambigeval.switch_point_analysis(
                    evaluations, claims_by_id, corpus.switch_points
                )
                write_csv(out / "reports" / "switch_offsets.csv", ambigeval.switch_rows_to_csv(rows))
            write_manifest(out, config, providers.store)
        click.echo(f"judged {len(evaluations)} evaluations over {len(claims)} claims")
    except ClaimkitError as error:
        raise _fail(error)


@cli.command()
@_common_options
@click.option("--revisions", "revisions_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--pairs", "pair_spec", default=None, help="Pairs like ATOMIC:SAFE,SIMPLE:MOLECULAR.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def overlap(revisions_path, pair_spec, out_dir, **options):
    """Bidirectional-entailment information overlap between revision sets."""
    try:
        config = _config_from_options(**options)
        providers = build_providers(config)
        revisions = load_revisions(revisions_path)
        present = sorted({rev.strategy for rev in revisions}, key=lambda s: s.value)
        if pair_spec:
            pairs = []
            for chunk in pair_spec.split(","):
                left, _, right = chunk.partition(":")
                pairs.append((Strategy(left.strip().upper()), Strategy(right.strip().upper())))
        else:
            pairs = [(a, b) for i, a in enumerate(present) for b in present[i + 1 :]]
        out = Path(out_dir)
        with output_lock(out):
            rows = run_overlap(revisions, pairs, providers.entail)
            reports = out / "reports"
            reports.mkdir(parents=True, exist_ok=True)
            (reports / "overlap.md").write_text(
                ambigeval.format_overlap_table(rows), encoding="utf-8"
            )
            write_csv(
                reports / "overlap.csv",
                [["pair", "overlap"], *[[label, f"{value:.6f}"] for label, value in rows]],
            )
            write_manifest(out, config, providers.store)
        click.echo(f"computed overlap for {len(rows)} strategy pairs")
    except ClaimkitError as error:
        raise _fail(error)


@cli.command()
@click.option("--out", "out_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--corpus-size", type=int, default=None, help="Claim-set size for minimality rates.")
@click.option(
    "--annotations",
    "annotations_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Human minimal/non-minimal adjudication file.",
)
def report(out_dir, corpus_size, annotations_path):
    """Recompute reports from stored artifacts; never touches a provider."""
    try:
        out = Path(out_dir)
        produced = []
        if annotations_path:
            annotations = load_minimality_annotations(annotations_path)
            rows = minimality.human_minimality_split(annotations)
            reports = out / "reports"
            reports.mkdir(parents=True, exist_ok=True)
            (reports / "human_minimality.md").write_text(
                minimality.format_human_minimality_table(rows), encoding="utf-8"
            )
            write_csv(
                reports / "human_minimality.csv",
                [
                    ["strategy", "minimal", "non_minimal"],
                    *[[s, f"{m:.6f}", f"{n:.6f}"] for s, m, n in rows],
                ],
            )
            produced.append("human_minimality")
        judgments_path = out / "judgments.jsonl"
        if judgments_path.exists():
            evaluations = load_evaluations(judgments_path)
            revisions = (
                load_revisions(out / "revisions.jsonl") if (out / "revisions.jsonl").exists() else []
            )
            write_ambig_outputs(out, evaluations, revisions)
            produced.extend(["accuracy", "errors"])
        verdicts_path = out / "verdicts.jsonl"
        if verdicts_path.exists():
            if corpus_size is None:
                raise SchemaError("corpus_size", detail="--corpus-size is required for minimality rates")
            verdicts = load_verdicts(verdicts_path)
            drops = [
                (record["claim_id"], record["strategy"], record["reason"])
                for _line, record in read_jsonl(out / "drops.jsonl")
            ] if (out / "drops.jsonl").exists() else []
            write_minimality_outputs(out, verdicts, drops, corpus_size=corpus_size)
            produced.append("minimality_rates")
        if not produced:
            raise SchemaError("out", detail="no judgments.jsonl or verdicts.jsonl found")
        click.echo(f"recomputed reports: {', '.join(produced)}")
    except ClaimkitError as error:
        raise _fail(error)


@cli.group()
def cache() -> None:
    """Replay store maintenance."""


@cache.command()
@click.option("--store", required=True, type=click.Path(exists=True, file_okay=False))
def inspect(store):
    """Print entry counts and the content hash of a replay store."""
    replay = ReplayStore(store)
    summary = {
        "entries": len(replay.entry_keys()),
        "kinds": replay.kind_counts(),
        "store_hash": replay.store_hash(),
    }
    click.echo(json.dumps(summary, sort_keys=True, indent=2))


def main() -> None:
    logging.basicConfig(level=os.environ.get("CLAIMKIT_LOG_LEVEL", "WARNING"))
    cli()


if __name__ == "__main__":
    main()
