"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline.
"""

import functools
import json
import random
import re
import time

import numpy as np
import pytest

from docqa.agent import (
    AgentConfig,
    CommandError,
    SearchAction,
    TerminatedBy,
    parse_command,
    run_agent,
)
from docqa.cli import main
from docqa.llm import ScriptedBackend, ScriptEntry, save_script
from docqa.metrics import (
    aggregate_runs,
    answer_correctness,
    attainment,
    build_attainment_report,
    context_recall,
    faithfulness,
    round_half_up,
    QARecord,
)
from docqa.rag import LocalHashEmbedder, build_index, chunk_document, retrieve
from docqa.search import SearchQuery, search

from conftest import (
    GOLDEN_QUESTION,
    collection_from_pages,
    golden_backend,
    ledger_collection,
)
from reference_values import (
    CORRECTNESS_IMPROVEMENT_POINTS,
    CORRECTNESS_PERCENT_PAIR,
    REFERENCE_ATTAINMENTS,
    REFERENCE_AVERAGES,
    REFERENCE_PAIRS,
)
from test_agent import make_hostile_commands
from test_cli import judge_script_entries
from test_rag import VectorEmbedder, brute_force_rank, make_chunks
from test_search import oracle_search


def criterion(number: int, title: str):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                result = fn(*args, **kwargs)
            except BaseException:
                print(f"[acceptance] criterion {number:2d}: FAIL - {title}")
                raise
            print(f"[acceptance] criterion {number:2d}: PASS - {title}")
            return result

        return wrapper

    return decorate


@criterion(1, "published attainment table reproduced exactly at 2 decimals")
def test_criterion_1_attainment_table_arithmetic():
    started = time.perf_counter()
    report = build_attainment_report(REFERENCE_PAIRS)
    for row in report.rows:
        for metric, cell in row.cells.items():
            expected = REFERENCE_ATTAINMENTS[row.dataset][metric]
            assert cell.attainment_pct == expected, (row.dataset, metric)
    assert report.averages == REFERENCE_AVERAGES
    spot = {
        attainment(0.8662, 0.9056): 95.65,
        attainment(0.6148, 0.8713): 70.56,
        attainment(0.5870, 0.5872): 99.97,
    }
    for got, expected in spot.items():
        assert got == expected
    assert time.perf_counter() - started < 1.0


@criterion(2, "multi-run comparison arithmetic (+8.47 points; mean/stddev)")
def test_criterion_2_multi_run_arithmetic():
    started = time.perf_counter()
    agent_value, rag_value = CORRECTNESS_PERCENT_PAIR
    assert round_half_up(agent_value - rag_value) == CORRECTNESS_IMPROVEMENT_POINTS
    stats = aggregate_runs([1.0, 2.0, 3.0])
    assert stats.mean == pytest.approx(2.0)
    assert stats.stddev == pytest.approx(1.0)
    assert time.perf_counter() - started < 1.0


@criterion(3, "golden scripted episode ends via FinalAnswer with page-14 evidence")
def test_criterion_3_golden_episode():
    backend = golden_backend()
    episode = run_agent(GOLDEN_QUESTION, ledger_collection(), backend)
    assert episode.terminated_by == TerminatedBy.FINAL_ANSWER
    assert backend.calls <= 4
    for needle in ("Membership", "Blockchain", "Chaincode"):
        assert needle in episode.final_answer
    assert any(":Page 14: " in ctx for ctx in episode.evidence_contexts)


ORACLE_WORDS = ("alpha", "beta", "gamma", "delta", "epsi", "zeta")


def _random_pattern(rng: random.Random) -> str:
    def atom() -> str:
        kind = rng.randrange(7)
        word = rng.choice(ORACLE_WORDS)
        if kind == 0:
            return word
        if kind == 1:
            return "[a-m]"
        if kind == 2:
            return r"\w+"
        if kind == 3:
            return word + rng.choice(["*", "+", "?", "{1,2}"])
        if kind == 4:
            return f"({word}|{rng.choice(ORACLE_WORDS)})"
        if kind == 5:
            return "^" + word
        return word + "$"

    return "|".join(atom() for _ in range(rng.randint(1, 3)))


def _random_collection(rng: random.Random):
    docs = {}
    remaining = 50
    for d in range(rng.randint(1, 3)):
        pages = []
        for _ in range(rng.randint(1, 3)):
            n_lines = min(rng.randint(1, 6), remaining)
            if n_lines <= 0:
                break
            remaining -= n_lines
            pages.append(
                "\n".join(
                    " ".join(
                        rng.choice(ORACLE_WORDS) for _ in range(rng.randint(0, 4))
                    )
                    for _ in range(n_lines)
                )
            )
        if pages:
            docs[f"files/d{d}.txt"] = pages
    if not docs:
        docs["files/d0.txt"] = ["alpha"]
    return collection_from_pages(docs)


@criterion(4, "search equals the per-line scan oracle on 500 randomized cases")
def test_criterion_4_search_oracle_500_cases():
    started = time.perf_counter()
    rng = random.Random(42)
    agreements = 0
    for _ in range(500):
        collection = _random_collection(rng)
        query = SearchQuery(
            pattern=_random_pattern(rng),
            case_insensitive=rng.random() < 0.5,
            max_matches=100_000,
        )
        got = [
            (m.doc_id, m.page_number, m.line_number)
            for m in search(collection, query).matches
        ]
        assert got == oracle_search(collection, query)
        agreements += 1
    assert agreements == 500
    assert time.perf_counter() - started < 10.0


@criterion(5, "chunker covers every token with exact overlap on 200 random triples")
def test_criterion_5_chunker_properties():
    from test_rag import chunk_start_oracle, doc_from_tokens

    started = time.perf_counter()
    rng = random.Random(7)
    for _ in range(200):
        total = rng.randint(1, 600)
        chunk_tokens = rng.randint(5, 100)
        overlap = rng.uniform(0.0, 0.8)
        doc = doc_from_tokens([f"t{i}" for i in range(total)])
        chunks = chunk_document(doc, chunk_tokens=chunk_tokens, overlap_fraction=overlap)
        assert [c.token_start for c in chunks] == chunk_start_oracle(
            total, chunk_tokens, overlap
        )
        covered = set()
        for c in chunks:
            covered.update(range(c.token_start, c.token_end))
        assert covered == set(range(total))
        expected_overlap = round(overlap * chunk_tokens)
        for prev, nxt in zip(chunks, chunks[1:]):
            assert prev.token_end - nxt.token_start == expected_overlap
    defaults = chunk_document(doc_from_tokens([f"w{i}" for i in range(1000)]))
    assert [c.token_start for c in defaults] == [0, 240, 480, 720]
    assert time.perf_counter() - started < 5.0


@criterion(6, "retrieval equals the full-sort oracle on 200 random indexes")
def test_criterion_6_retrieval_oracle():
    started = time.perf_counter()
    rng = np.random.default_rng(11)
    py_rng = random.Random(11)
    for _ in range(200):
        n = py_rng.randint(1, 100)
        dim = 8
        vectors = rng.normal(size=(n, dim))
        # Occasionally force exact duplicates so tie-breaking is exercised.
        if n > 2 and py_rng.random() < 0.5:
            vectors[1] = vectors[0]
        mapping = {f"text{i}": vectors[i].tolist() for i in range(n)}
        mapping["query"] = rng.normal(size=dim).tolist()
        embedder = VectorEmbedder(mapping, dim)
        index = build_index(make_chunks([f"text{i}" for i in range(n)]), embedder)
        k = py_rng.randint(1, n + 5)
        got = [r.chunk.chunk_id for r in retrieve(index, "query", embedder, k=k)]
        assert got == brute_force_rank(index, embedder.embed("query"))[: min(k, n)]
    # Self-query: a stored vector used as the query scores 1.0 within 1e-9.
    embedder = LocalHashEmbedder(64)
    texts = ["solar panels convert light", "rivers erode canyons"]
    index = build_index(make_chunks(texts), embedder)
    top = retrieve(index, texts[0], embedder, k=1)[0]
    assert top.chunk.text == texts[0]
    assert abs(top.score - 1.0) <= 1e-9
    assert time.perf_counter() - started < 5.0


class _PairEmbedder:
    dimension = 2
    tag = "fixed-pair"

    def __init__(self, first, second, cosine):
        self.vectors = {
            first: np.array([1.0, 0.0]),
            second: np.array([cosine, float(np.sqrt(1 - cosine**2))]),
        }

    def embed(self, text):
        return self.vectors[text]


@criterion(7, "metric contracts under a scripted judge")
def test_criterion_7_metric_contracts():
    def scripted(*replies):
        return ScriptedBackend(
            [ScriptEntry(text, index=i) for i, text in enumerate(replies, start=1)]
        )

    score = faithfulness(
        "answer",
        ["context"],
        scripted("1. s1\n2. s2\n3. s3", "yes", "yes", "no"),
    )
    assert score.value == pytest.approx(0.6667, abs=1e-4)

    record = QARecord(question="q", ground_truth_answer="gt")
    empty_retrieval = context_recall(record, [], scripted("unused"))
    assert empty_retrieval.value == 0.0

    blended = answer_correctness(
        "the answer",
        "the truth",
        scripted(
            "1. a1\n2. a2\n3. a3",
            "1. g1\n2. g2\n3. g3",
            "ANSWER: TP, TP, FP\nGROUND: TP, TP, FN",
        ),
        _PairEmbedder("the answer", "the truth", cosine=0.8),
    )
    assert blended.value == pytest.approx(0.70, abs=1e-4)

    text = "Water boils at one hundred degrees."
    identity = answer_correctness(
        text,
        text,
        scripted(f"1. {text}", f"1. {text}", "ANSWER: TP\nGROUND: TP"),
        LocalHashEmbedder(256),
    )
    assert identity.value == pytest.approx(1.0, abs=1e-9)


@criterion(8, "hostile commands all rejected with zero host effects")
def test_criterion_8_sandbox_fuzz(monkeypatch):
    import os
    import subprocess

    invocations = {"count": 0}

    def forbidden(*args, **kwargs):
        invocations["count"] += 1
        raise AssertionError("interpreter attempted host execution")

    monkeypatch.setattr(subprocess, "run", forbidden)
    monkeypatch.setattr(subprocess, "Popen", forbidden)
    monkeypatch.setattr(subprocess, "call", forbidden)
    monkeypatch.setattr(os, "system", forbidden)
    monkeypatch.setattr(os, "popen", forbidden)

    commands = make_hostile_commands(100)
    assert len(commands) == 100
    rejected = 0
    for command in commands:
        with pytest.raises(CommandError):
            parse_command(command)
        rejected += 1
    assert rejected == 100
    assert invocations["count"] == 0


@criterion(9, "run + eval are byte-identical across invocations")
def test_criterion_9_cli_determinism(tmp_path):
    from docqa.corpus import save_document

    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for record in ledger_collection().documents:
        save_document(record, corpus)
    dataset = tmp_path / "ds.jsonl"
    dataset.write_text(
        json.dumps(
            {
                "question": GOLDEN_QUESTION,
                "ground_truth": "Membership admits nodes, Blockchain provides "
                "consensus, Chaincode runs the smart contracts.",
                "reference_contexts": ["component descriptions"],
            }
        )
        + "\n",
        encoding="utf-8",
    )
    agent_script = tmp_path / "agent.jsonl"
    from conftest import golden_script

    save_script(golden_script(), agent_script)
    judge_script = tmp_path / "judge.jsonl"
    save_script(judge_script_entries(), judge_script)

    outputs = []
    for tag in ("one", "two"):
        artifact = tmp_path / f"artifact-{tag}.json"
        scores = tmp_path / f"scores-{tag}.json"
        report = tmp_path / f"report-{tag}"
        assert main(
            [
                "run", "--dataset", str(dataset), "--mode", "agent",
                "--corpus", str(corpus), "--seed", "7",
                "--out", str(artifact), "--replay", str(agent_script),
            ]
        ) == 0
        assert main(
            [
                "eval", "--artifact", str(artifact), "--dataset", str(dataset),
                "--out", str(scores), "--replay", str(judge_script),
            ]
        ) == 0
        assert main(
            [
                "report", "--agent", str(scores), "--rag", str(scores),
                "--out", str(report),
            ]
        ) == 0
        outputs.append(
            (
                artifact.read_bytes(),
                scores.read_bytes(),
                report.with_suffix(".md").read_bytes(),
                report.with_suffix(".json").read_bytes(),
            )
        )
    assert outputs[0] == outputs[1]


@criterion(10, "budget exhaustion yields t_max search steps plus one forced call")
@pytest.mark.parametrize("t_max", [1, 3, 5])
def test_criterion_10_budget_behavior(t_max):
    collection = ledger_collection()
    backend = ScriptedBackend(
        [
            ScriptEntry(
                f"Thought: {i}\nAction: terminal\nAction Input: rga 'ledger{i}' ./files/",
                index=i,
            )
            for i in range(1, t_max + 1)
        ]
        + [ScriptEntry("forced answer", index=t_max + 1)]
    )
    episode = run_agent("q", collection, backend, AgentConfig(t_max=t_max))
    assert episode.terminated_by == TerminatedBy.BUDGET_EXHAUSTED
    search_steps = [s for s in episode.steps if isinstance(s.action, SearchAction)]
    assert len(search_steps) == t_max
    assert backend.calls == t_max + 1
    assert episode.final_answer == "forced answer"
