"""Dataset execution and comparison.

Two-phase flow: ``run_dataset`` executes questions in agent or RAG mode and
persists a RunArtifact; ``evaluate_run`` judges a persisted artifact;
``compare_runs`` turns agent and RAG score files into an attainment report
rendered as markdown plus a machine-readable JSON twin.
"""

from __future__ import annotations

import json
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .agent import AgentConfig, run_agent
from .corpus import DocumentCollection
from .llm import ChatBackend
from .metrics import (
    ANSWER_CORRECTNESS,
    CONTEXT_RECALL,
    FAITHFULNESS,
    AttainmentReport,
    JudgeError,
    MetricScore,
    QARecord,
    answer_correctness,
    build_attainment_report,
    context_recall,
    faithfulness,
)
from .rag import (
    Embedder,
    RagConfig,
    RetrievedChunk,
    build_index,
    chunk_document,
    rag_answer,
    retrieve,
)

ARTIFACT_FORMAT_TAG = "docqa-run-artifact/1"
SCORES_FORMAT_TAG = "docqa-scores/1"

MODES = ("agent", "rag")


class HarnessError(Exception):
    pass


class ComparisonError(HarnessError):
    pass


@dataclass(frozen=True)
class Dataset:
    name: str
    records: tuple[QARecord, ...]

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("dataset name must be non-empty")
        if not self.records:
            raise ValueError("dataset must hold at least one record")


def load_dataset(path: str | Path, name: str | None = None) -> Dataset:
    """Read a JSONL dataset of {question, ground_truth, reference_contexts}."""
    path = Path(path)
    records = []
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                records.append(
                    QARecord(
                        question=obj["question"],
                        ground_truth_answer=obj["ground_truth"],
                        reference_contexts=tuple(obj.get("reference_contexts", ())),
                    )
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise HarnessError(f"{path}: line {lineno}: bad dataset record: {exc}") from exc
    if not records:
        raise HarnessError(f"{path}: dataset has no records")
    return Dataset(name=name or path.stem, records=tuple(records))


@dataclass(frozen=True)
class Backends:
    llm: ChatBackend
    embedder: Embedder


@dataclass(frozen=True)
class RunnerConfig:
    sample_size: int | None = None
    seed: int = 0
    workers: int = 1
    agent: AgentConfig = field(default_factory=AgentConfig)
    rag: RagConfig = field(default_factory=RagConfig)

    def snapshot(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RunEntry:
    question: str
    answer: str | None
    contexts: tuple[str, ...] = ()
    iterations: int | None = None
    latency_ms: int = 0
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "answer": self.answer,
            "contexts": list(self.contexts),
            "iterations": self.iterations,
            "latency_ms": self.latency_ms,
            "error": self.error,
        }


@dataclass(frozen=True)
class RunArtifact:
    dataset: str
    mode: str
    config: dict
    entries: tuple[RunEntry, ...]

    def to_dict(self) -> dict:
        return {
            "format": ARTIFACT_FORMAT_TAG,
            "dataset": self.dataset,
            "mode": self.mode,
            "config": self.config,
            "entries": [entry.to_dict() for entry in self.entries],
        }


def save_artifact(artifact: RunArtifact, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(artifact.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def load_artifact(path: str | Path) -> RunArtifact:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != ARTIFACT_FORMAT_TAG:
        raise HarnessError(f"unsupported artifact format {payload.get('format')!r}")
    return RunArtifact(
        dataset=payload["dataset"],
        mode=payload["mode"],
        config=payload["config"],
        entries=tuple(
            RunEntry(
                question=e["question"],
                answer=e["answer"],
                contexts=tuple(e["contexts"]),
                iterations=e["iterations"],
                latency_ms=e["latency_ms"],
                error=e["error"],
            )
            for e in payload["entries"]
        ),
    )


def select_subsample(n: int, sample_size: int | None, seed: int) -> list[int]:
    """Deterministic question subset: indices sorted, chosen by seeded RNG."""
    if sample_size is None or sample_size >= n:
        return list(range(n))
    rng = random.Random(seed)
    return sorted(rng.sample(range(n), sample_size))


def run_dataset(
    dataset: Dataset,
    mode: str,
    config: RunnerConfig,
    collection: DocumentCollection,
    backends: Backends,
) -> RunArtifact:
    """Execute the (optionally subsampled) dataset in one mode.

    Per-question failures are recorded on their entries without aborting the
    run.  Latency is recorded as 0 under a deterministic backend so scripted
    runs serialize byte-identically.
    """
    if mode not in MODES:
        raise HarnessError(f"unknown mode {mode!r}; expected one of {MODES}")
    if len(collection) == 0:
        raise HarnessError("collection holds no searchable documents")
    deterministic = bool(getattr(backends.llm, "deterministic", False))
    indices = select_subsample(len(dataset.records), config.sample_size, config.seed)
    questions = [dataset.records[i].question for i in indices]

    index = None
    if mode == "rag":
        chunks = []
        for doc in collection.documents:
            chunks.extend(
                chunk_document(doc, config.rag.chunk_tokens, config.rag.overlap_fraction)
            )
        index = build_index(chunks, backends.embedder)

    def execute(question: str) -> RunEntry:
        started = time.perf_counter()
        try:
            if mode == "agent":
                episode = run_agent(question, collection, backends.llm, config.agent)
                answer = episode.final_answer
                contexts = episode.evidence_contexts
                iterations = len(episode.steps) - 1
            else:
                retrieved: list[RetrievedChunk] = retrieve(
                    index, question, backends.embedder, k=config.rag.top_k
                )
                record = rag_answer(
                    question,
                    retrieved,
                    backends.llm,
                    temperature=config.rag.temperature,
                    max_tokens=config.rag.max_tokens,
                )
                answer = record.answer
                contexts = record.contexts
                iterations = None
        except Exception as exc:  # per-question failures must not abort the run
            return RunEntry(question=question, answer=None, error=f"{type(exc).__name__}: {exc}")
        latency = 0 if deterministic else int((time.perf_counter() - started) * 1000)
        return RunEntry(
            question=question,
            answer=answer,
            contexts=tuple(contexts),
            iterations=iterations,
            latency_ms=latency,
        )

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            entries = tuple(pool.map(execute, questions))
    else:
        entries = tuple(execute(q) for q in questions)

    snapshot = {
        "dataset": dataset.name,
        "mode": mode,
        "corpus_root": collection.root,
        **config.snapshot(),
    }
    return RunArtifact(dataset=dataset.name, mode=mode, config=snapshot, entries=entries)


@dataclass(frozen=True)
class EvalRecord:
    question: str
    scores: dict[str, MetricScore] = field(default_factory=dict)
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "scores": {name: score.to_dict() for name, score in self.scores.items()},
            "error": self.error,
        }


@dataclass(frozen=True)
class DatasetScores:
    dataset: str
    mode: str
    metrics: tuple[str, ...]
    records: tuple[EvalRecord, ...]
    means: dict[str, float | None]
    counts: dict[str, dict[str, int]]

    def to_dict(self) -> dict:
        return {
            "format": SCORES_FORMAT_TAG,
            "dataset": self.dataset,
            "mode": self.mode,
            "metrics": list(self.metrics),
            "records": [record.to_dict() for record in self.records],
            "means": self.means,
            "counts": self.counts,
        }


def save_scores(scores: DatasetScores, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(scores.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def load_scores(path: str | Path) -> DatasetScores:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != SCORES_FORMAT_TAG:
        raise HarnessError(f"unsupported scores format {payload.get('format')!r}")
    return DatasetScores(
        dataset=payload["dataset"],
        mode=payload["mode"],
        metrics=tuple(payload["metrics"]),
        records=tuple(
            EvalRecord(
                question=r["question"],
                scores={
                    name: MetricScore(value=s["value"], detail=s["detail"])
                    for name, s in r["scores"].items()
                },
                error=r["error"],
            )
            for r in payload["records"]
        ),
        means=payload["means"],
        counts={k: dict(v) for k, v in payload["counts"].items()},
    )


def evaluate_run(
    artifact: RunArtifact,
    dataset: Dataset,
    judge: ChatBackend,
    embedder: Embedder,
    correctness_only: bool = False,
    workers: int = 1,
) -> DatasetScores:
    """Apply the metric suite to a persisted artifact.

    ``correctness_only`` evaluates answer correctness alone (for corpora
    whose structure defeats context-based metrics).  Judge failures become
    per-question error records; undefined scores are excluded from means
    but counted.
    """
    by_question = {record.question: record for record in dataset.records}
    metric_names = (ANSWER_CORRECTNESS,) if correctness_only else (
        FAITHFULNESS,
        CONTEXT_RECALL,
        ANSWER_CORRECTNESS,
    )

    def judge_entry(entry) -> EvalRecord:
        if entry.error is not None:
            return EvalRecord(question=entry.question, error=f"run error: {entry.error}")
        record = by_question.get(entry.question)
        if record is None:
            return EvalRecord(question=entry.question, error="question not in dataset")
        if entry.answer is None:
            return EvalRecord(question=entry.question, error="no answer recorded")
        contexts = list(entry.contexts)
        scores: dict[str, MetricScore] = {}
        try:
            if FAITHFULNESS in metric_names:
                scores[FAITHFULNESS] = faithfulness(entry.answer, contexts, judge)
            if CONTEXT_RECALL in metric_names:
                scores[CONTEXT_RECALL] = context_recall(record, contexts, judge)
            if ANSWER_CORRECTNESS in metric_names:
                scores[ANSWER_CORRECTNESS] = answer_correctness(
                    entry.answer, record.ground_truth_answer, judge, embedder
                )
        except JudgeError as exc:
            return EvalRecord(question=entry.question, error=f"judge error: {exc}")
        return EvalRecord(question=entry.question, scores=scores)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = tuple(pool.map(judge_entry, artifact.entries))
    else:
        records = tuple(judge_entry(entry) for entry in artifact.entries)

    means: dict[str, float | None] = {}
    counts: dict[str, dict[str, int]] = {}
    for name in metric_names:
        defined = [
            r.scores[name].value
            for r in records
            if name in r.scores and r.scores[name].defined
        ]
        undefined = sum(
            1 for r in records if name in r.scores and not r.scores[name].defined
        )
        means[name] = sum(defined) / len(defined) if defined else None
        counts[name] = {"defined": len(defined), "undefined": undefined}
    return DatasetScores(
        dataset=artifact.dataset,
        mode=artifact.mode,
        metrics=metric_names,
        records=records,
        means=means,
        counts=counts,
    )


def _question_set(scores: DatasetScores) -> set[str]:
    return {record.question for record in scores.records}


def compare_runs(
    agent_eval: DatasetScores | list[DatasetScores],
    rag_eval: DatasetScores | list[DatasetScores],
) -> AttainmentReport:
    """Per-metric attainment per dataset plus the averages row.

    Both sides must cover the same datasets and question subsets; mismatches
    raise ComparisonError listing the symmetric difference.
    """
    agent_list = [agent_eval] if isinstance(agent_eval, DatasetScores) else list(agent_eval)
    rag_list = [rag_eval] if isinstance(rag_eval, DatasetScores) else list(rag_eval)
    agent_by_name = {s.dataset: s for s in agent_list}
    rag_by_name = {s.dataset: s for s in rag_list}
    if set(agent_by_name) != set(rag_by_name):
        diff = sorted(set(agent_by_name) ^ set(rag_by_name))
        raise ComparisonError(f"datasets differ between sides: {diff}")
    pairs = []
    metrics_seen: list[str] = []
    for name in (s.dataset for s in agent_list):
        agent_side, rag_side = agent_by_name[name], rag_by_name[name]
        question_diff = sorted(_question_set(agent_side) ^ _question_set(rag_side))
        if question_diff:
            raise ComparisonError(
                f"dataset {name!r}: question sets differ: {question_diff}"
            )
        shared = [m for m in agent_side.metrics if m in rag_side.metrics]
        cells = {
            metric: (agent_side.means.get(metric), rag_side.means.get(metric))
            for metric in shared
        }
        for metric in shared:
            if metric not in metrics_seen:
                metrics_seen.append(metric)
        pairs.append((name, cells))
    return build_attainment_report(pairs, tuple(metrics_seen))


def _metric_title(metric: str) -> str:
    return metric.replace("_", " ").title()


def _fmt(value: float | None, spec: str = ".4f") -> str:
    return "n/a" if value is None else format(value, spec)


def render_report_markdown(report: AttainmentReport) -> str:
    header = ["Dataset"]
    for metric in report.metrics:
        title = _metric_title(metric)
        header += [f"{title} Agent", f"{title} RAG", f"{title} Attain. (%)", f"{title} Delta (pts)"]
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "---|" * len(header),
    ]
    for row in report.rows:
        cells = [row.dataset]
        for metric in report.metrics:
            cell = row.cells.get(metric)
            if cell is None:
                cells += ["n/a"] * 4
            else:
                cells += [
                    _fmt(cell.agent),
                    _fmt(cell.rag),
                    _fmt(cell.attainment_pct, ".2f"),
                    "n/a" if cell.delta is None else format(cell.delta, "+.2f"),
                ]
        lines.append("| " + " | ".join(cells) + " |")
    average_cells = ["**Average**"]
    for metric in report.metrics:
        average_cells += ["", "", _fmt(report.averages.get(metric), ".2f"), ""]
    lines.append("| " + " | ".join(average_cells) + " |")
    return "\n".join(lines) + "\n"


def report_to_dict(report: AttainmentReport) -> dict:
    return {
        "metrics": list(report.metrics),
        "rows": [
            {
                "dataset": row.dataset,
                "cells": {
                    metric: {
                        "agent": cell.agent,
                        "rag": cell.rag,
                        "attainment_pct": cell.attainment_pct,
                        "delta": cell.delta,
                    }
                    for metric, cell in row.cells.items()
                },
            }
            for row in report.rows
        ],
        "averages": dict(report.averages),
    }


def save_report(report: AttainmentReport, base_path: str | Path) -> tuple[Path, Path]:
    """Write ``<base>.md`` and ``<base>.json``; returns both paths."""
    base = Path(base_path)
    if base.suffix in (".md", ".json"):
        base = base.with_suffix("")
    md_path = base.with_suffix(".md")
    json_path = base.with_suffix(".json")
    md_path.parent.mkdir(parents=True, exist_ok=True)
    md_path.write_text(render_report_markdown(report), encoding="utf-8")
    json_path.write_text(
        json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    return md_path, json_path
