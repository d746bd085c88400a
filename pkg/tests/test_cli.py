"""Ingestion, run orchestration, determinism, and CLI error surfaces."""

from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from claimkit.cli import (
    RunConfig,
    build_providers,
    cli,
    ingest_ambig_corpus,
    ingest_factcheck_corpus,
    output_lock,
    sample_claims,
)
from claimkit.core import read_jsonl, write_jsonl
from claimkit.errors import ParseError, RunLocked, SchemaError


def write_lines(path: Path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def response_record(response_id="r1", **overrides):
    record = {
        "response_id": response_id,
        "prompt": "p",
        "text": "Some generated text.",
        "source": "test",
        "claims": [
            {
                "claim_id": f"{response_id}-c0",
                "response_id": response_id,
                "text": "A claim.",
                "ordinal": 0,
                "human_label": "SUPPORTED",
                "subject_hint": None,
            }
        ],
    }
    record.update(overrides)
    return record


class TestIngestFactcheck:
    def test_happy_path(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_lines(path, [json.dumps(response_record(f"r{i}")) for i in range(3)])
        corpus = ingest_factcheck_corpus(path)
        assert len(corpus.pairs) == 3
        assert corpus.dropped_label_count == 0

    def test_missing_text_names_field_and_line(self, tmp_path):
        record = response_record("r1")
        del record["text"]
        path = tmp_path / "corpus.jsonl"
        write_lines(path, [json.dumps(response_record("r0")), json.dumps(record)])
        with pytest.raises(SchemaError) as excinfo:
            ingest_factcheck_corpus(path)
        assert excinfo.value.field == "text"
        assert excinfo.value.line_number == 2

    def test_out_of_scope_label_dropped_and_counted(self, tmp_path):
        record = response_record("r1")
        record["claims"].append(
            {
                "claim_id": "r1-c1",
                "response_id": "r1",
                "text": "A controversial claim.",
                "ordinal": 1,
                "human_label": "controversial",
            }
        )
        path = tmp_path / "corpus.jsonl"
        write_lines(path, [json.dumps(record)])
        corpus = ingest_factcheck_corpus(path)
        assert corpus.dropped_label_count == 1
        assert len(corpus.pairs[0][1]) == 1

    def test_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_lines(path, [json.dumps(response_record("r0")), "{not json"])
        with pytest.raises(ParseError) as excinfo:
            ingest_factcheck_corpus(path)
        assert excinfo.value.line_number == 2

    def test_duplicate_response_id_rejected(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_lines(path, [json.dumps(response_record("r1")), json.dumps(response_record("r1"))])
        with pytest.raises(SchemaError) as excinfo:
            ingest_factcheck_corpus(path)
        assert excinfo.value.field == "response_id"
        assert excinfo.value.line_number == 2

    def test_duplicate_claim_id_rejected(self, tmp_path):
        record = response_record("r1")
        record["claims"].append(dict(record["claims"][0], ordinal=1))
        path = tmp_path / "corpus.jsonl"
        write_lines(path, [json.dumps(record)])
        with pytest.raises(SchemaError) as excinfo:
            ingest_factcheck_corpus(path)
        assert excinfo.value.field == "claim_id"


class TestIngestAmbig:
    def test_happy_path(self, world):
        corpus = ingest_ambig_corpus(world["ambig"])
        assert len(corpus.claims) == 16
        assert len(corpus.documents) == 2
        assert corpus.switch_points == {"fx-ra": 4, "fx-rb": 2}
        docs = corpus.docs_for_claim(corpus.claims[0])
        assert sum(1 for d in docs if d.is_gold_entity) == 1

    def test_duplicate_gold_entity_rejected(self, tmp_path, world):
        root = tmp_path / "ambig"
        root.mkdir()
        for name in ("responses.jsonl", "claims.jsonl", "switch_points.jsonl"):
            (root / name).write_text((world["ambig"] / name).read_text(), encoding="utf-8")
        write_jsonl(
            root / "documents.jsonl",
            [
                {"doc_id": "d1", "entity_id": "e1", "text": "text one", "is_gold_entity": True},
                {"doc_id": "d2", "entity_id": "e2", "text": "text two", "is_gold_entity": True},
            ],
        )
        with pytest.raises(SchemaError) as excinfo:
            ingest_ambig_corpus(root)
        assert excinfo.value.field == "is_gold_entity"

    def test_run_summary_echoes_sample_size(self, world):
        corpus = ingest_ambig_corpus(world["ambig"])
        sampled = sample_claims(corpus.claims, 10, seed=7)
        assert len(sampled) == 10
        assert sample_claims(corpus.claims, 10, seed=7) == sampled
        assert sample_claims(corpus.claims, 99, seed=7) == list(corpus.claims)


class TestRunConfig:
    def test_seed_is_mandatory(self):
        with pytest.raises(TypeError):
            RunConfig()  # type: ignore[call-arg]

    def test_replay_only_needs_no_endpoints(self, tmp_path):
        config = RunConfig(seed=1, store_path=str(tmp_path))
        providers = build_providers(config)
        assert providers.chat is not None

    def test_live_record_requires_endpoints(self, tmp_path):
        with pytest.raises(ValueError):
            RunConfig(seed=1, store_path=str(tmp_path), cache_mode="live-record")

    def test_unknown_config_key_rejected(self):
        with pytest.raises(SchemaError):
            RunConfig.from_mapping({"seed": 1, "store_path": "s", "bogus": True})

    def test_config_hash_stable(self, tmp_path):
        config = RunConfig(seed=1, store_path=str(tmp_path))
        assert config.config_hash() == RunConfig(seed=1, store_path=str(tmp_path)).config_hash()
        assert config.config_hash() != RunConfig(seed=2, store_path=str(tmp_path)).config_hash()


class TestOutputLock:
    def test_lock_excludes_second_run(self, tmp_path):
        with output_lock(tmp_path):
            with pytest.raises(RunLocked):
                with output_lock(tmp_path):
                    pass
        # released afterwards
        with output_lock(tmp_path):
            pass


def run_cli(args):
    return CliRunner().invoke(cli, args, catch_exceptions=False)


class TestCliCommands:
    def test_minimality_end_to_end(self, world, tmp_path):
        out = tmp_path / "out"
        result = run_cli(
            [
                "minimality",
                "--config",
                str(world["min_config"]),
                "--corpus",
                str(world["factcheck"]),
                "--out",
                str(out),
            ]
        )
        assert result.exit_code == 0, result.output + result.stderr
        assert (out / "verdicts.jsonl").exists()
        assert (out / "manifest.json").exists()
        table = (out / "reports" / "minimality_rates.md").read_text()
        assert "25.00%" in table and "10.00%" in table

    def test_replay_miss_names_request_hash(self, world, tmp_path):
        empty_store = tmp_path / "empty-store"
        empty_store.mkdir()
        out = tmp_path / "out"
        result = run_cli(
            [
                "minimality",
                "--config",
                str(world["min_config"]),
                "--store",
                str(empty_store),
                "--corpus",
                str(world["factcheck"]),
                "--out",
                str(out),
            ]
        )
        assert result.exit_code == 1
        failure = json.loads(result.stderr)
        assert failure["error"] == "ReplayMiss"
        assert len(failure["request_hash"]) == 64

    def test_report_recomputes_offline(self, world, tmp_path, monkeypatch):
        out = tmp_path / "out"
        result = run_cli(
            [
                "ambig-eval",
                "--config",
                str(world["ambig_config"]),
                "--dataset",
                str(world["ambig"]),
                "--out",
                str(out),
                "--switch-analysis",
            ]
        )
        assert result.exit_code == 0, result.output + result.stderr
        before = (out / "reports" / "accuracy.md").read_bytes()

        # Any network use (or even provider construction) must fail loudly.
        import claimkit.cli as cli_module
        import requests

        def forbidden(*args, **kwargs):
            raise AssertionError("report must not open network connections")

        monkeypatch.setattr(requests, "post", forbidden)
        monkeypatch.setattr(cli_module, "build_providers", forbidden)
        result = run_cli(["report", "--out", str(out)])
        assert result.exit_code == 0, result.output + result.stderr
        assert (out / "reports" / "accuracy.md").read_bytes() == before

    def test_overlap_matches_direct_computation(self, world, tmp_path):
        eval_out = tmp_path / "eval"
        run_cli(
            [
                "ambig-eval",
                "--config",
                str(world["ambig_config"]),
                "--dataset",
                str(world["ambig"]),
                "--out",
                str(eval_out),
            ]
        )
        out = tmp_path / "overlap"
        result = run_cli(
            [
                "overlap",
                "--config",
                str(world["ambig_config"]),
                "--revisions",
                str(eval_out / "revisions.jsonl"),
                "--pairs",
                "ATOMIC:SAFE",
                "--out",
                str(out),
            ]
        )
        assert result.exit_code == 0, result.output + result.stderr
        csv_text = (out / "reports" / "overlap.csv").read_text()
        assert "ATOMIC & SAFE,0.625000" in csv_text
        md = (out / "reports" / "overlap.md").read_text()
        assert "| ATOMIC & SAFE | 62% |" in md

    def test_report_builds_human_minimality_split(self, tmp_path):
        annotations = tmp_path / "annotations.jsonl"
        write_lines(
            annotations,
            [
                json.dumps({"claim_id": "a", "strategy": "SAFE", "human_minimality_label": "minimal"}),
                json.dumps({"claim_id": "b", "strategy": "SAFE", "human_minimality_label": "non-minimal"}),
                json.dumps({"claim_id": "c", "strategy": "SIMPLE", "human_minimality_label": "non-minimal"}),
            ],
        )
        out = tmp_path / "out"
        out.mkdir()
        result = run_cli(["report", "--out", str(out), "--annotations", str(annotations)])
        assert result.exit_code == 0, result.output + result.stderr
        table = (out / "reports" / "human_minimality.md").read_text()
        assert "| SAFE | 50.0% | 50.0% |" in table
        assert "| SIMPLE | 0.0% | 100.0% |" in table

    def test_report_rejects_unknown_minimality_label(self, tmp_path):
        annotations = tmp_path / "annotations.jsonl"
        write_lines(
            annotations,
            [json.dumps({"claim_id": "a", "strategy": "SAFE", "human_minimality_label": "meh"})],
        )
        out = tmp_path / "out"
        out.mkdir()
        result = run_cli(["report", "--out", str(out), "--annotations", str(annotations)])
        assert result.exit_code == 1
        failure = json.loads(result.stderr)
        assert failure["error"] == "SchemaError"
        assert failure["field"] == "human_minimality_label"

    def test_cache_inspect(self, world):
        result = run_cli(["cache", "inspect", "--store", str(world["store"])])
        assert result.exit_code == 0
        summary = json.loads(result.output)
        assert summary["entries"] > 0
        assert set(summary["kinds"]) == {"complete", "entail", "check"}
        assert len(summary["store_hash"]) == 64

    def test_decompose_round_trip(self, tmp_path):
        from claimkit.decomposition import extract_atomic_facts
        from claimkit.providers import (
            PromptRunner,
            RecordingChatProvider,
            ReplayStore,
            ScriptedChatProvider,
        )

        corpus = tmp_path / "corpus.jsonl"
        write_lines(
            corpus,
            [
                json.dumps(
                    {
                        "response_id": "d1",
                        "prompt": "p",
                        "text": "Alpha happened. Beta happened.",
                        "source": "test",
                        "claims": [],
                    }
                )
            ],
        )
        store = tmp_path / "store"
        replies = {"Alpha happened.": "- Fact one.\n- Fact two.", "Beta happened.": "Fact three."}

        def script(request):
            for line in request.rendered_prompt.splitlines():
                if line in replies:
                    return replies[line]
            raise LookupError(request.rendered_prompt[:60])

        recorder = RecordingChatProvider(ScriptedChatProvider(script), ReplayStore(store))
        runner = PromptRunner(chat=recorder, temperature=0.75, seed=3, model_tag="fixture-model")
        from claimkit.core import ModelResponse

        extract_atomic_facts(ModelResponse("d1", "p", "Alpha happened. Beta happened."), runner)

        out = tmp_path / "out"
        result = run_cli(
            [
                "decompose",
                "--seed",
                "3",
                "--replay-only",
                "--store",
                str(store),
                "--model-tag",
                "fixture-model",
                "--corpus",
                str(corpus),
                "--out",
                str(out),
            ]
        )
        assert result.exit_code == 0, result.output + result.stderr
        claims = [record for _line, record in read_jsonl(out / "claims.jsonl")]
        assert [c["text"] for c in claims] == ["Fact one.", "Fact two.", "Fact three."]
        assert [c["ordinal"] for c in claims] == [0, 1, 2]

    def test_locked_output_directory_fails(self, world, tmp_path):
        out = tmp_path / "out"
        out.mkdir()
        (out / ".lock").write_text("123", encoding="utf-8")
        result = run_cli(
            [
                "minimality",
                "--config",
                str(world["min_config"]),
                "--corpus",
                str(world["factcheck"]),
                "--out",
                str(out),
            ]
        )
        assert result.exit_code == 1
        failure = json.loads(result.stderr)
        assert failure["error"] == "RunLocked"
