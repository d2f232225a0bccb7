"""Judge-based quality metrics and attainment arithmetic.

Faithfulness, context recall and answer correctness are computed by
decomposing text into atomic statements with a judge LLM and scoring
statement-level verdicts; attainment expresses an agent metric as a
percentage of the RAG baseline.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

from .llm import BackendError, ChatBackend, ChatRequest, ScriptError
from .rag import Embedder, cosine_similarity

FAITHFULNESS = "faithfulness"
CONTEXT_RECALL = "context_recall"
ANSWER_CORRECTNESS = "answer_correctness"
METRIC_ORDER = (FAITHFULNESS, CONTEXT_RECALL, ANSWER_CORRECTNESS)

JUDGE_RETRIES = 2

# Weighting of statement-level factual F1 vs embedding similarity in
# answer correctness.
F1_WEIGHT = 0.75
SIMILARITY_WEIGHT = 0.25


class JudgeError(Exception):
    """Judge backend failed or kept returning unparseable output."""


@dataclass(frozen=True)
class QARecord:
    question: str
    ground_truth_answer: str
    reference_contexts: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.question:
            raise ValueError("question must be non-empty")
        if not self.ground_truth_answer:
            raise ValueError("ground_truth_answer must be non-empty")


@dataclass(frozen=True)
class StatementVerdict:
    statement: str
    verdict: bool
    rationale: str = ""

    def to_dict(self) -> dict:
        return {
            "statement": self.statement,
            "verdict": self.verdict,
            "rationale": self.rationale,
        }


@dataclass(frozen=True)
class MetricScore:
    """Value in [0, 1], or None under the documented degenerate conditions;
    undefined scores are excluded from aggregates."""

    value: float | None
    detail: dict = field(default_factory=dict)

    @property
    def defined(self) -> bool:
        return self.value is not None

    def to_dict(self) -> dict:
        return {"value": self.value, "detail": self.detail}


DECOMPOSE_PROMPT = """\
Break the following text into short, self-contained factual statements.
Each statement must stand on its own without pronouns that need the others.
Reply with a numbered list only ("1. ...", one statement per line) and
nothing else.

Text:
{text}
"""

SUPPORT_PROMPT = """\
Context:
{context}

Statement:
{statement}

Can the statement be inferred directly from the context above? Begin your
reply with "yes" or "no", then give a one-sentence reason.
"""

ATTRIBUTION_PROMPT = """\
Retrieved passages:
{context}

Statement:
{statement}

Can the statement be attributed to the retrieved passages above? Begin your
reply with "yes" or "no", then give a one-sentence reason.
"""

CLASSIFY_PROMPT = """\
Compare two statement lists. A candidate statement is TP when the reference
list expresses the same fact, otherwise FP. A reference statement is TP when
the candidate list expresses the same fact, otherwise FN.

Candidate statements:
{answer_statements}

Reference statements:
{ground_statements}

Reply with exactly two lines, one label per statement, comma separated:
ANSWER: <TP or FP for each candidate statement, in order>
GROUND: <TP or FN for each reference statement, in order>
"""

_NUMBERED_RE = re.compile(r"^\s*\d+[.)]\s*(.+?)\s*$")
_YES_NO_RE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


def _call_judge(judge: ChatBackend, prompt: str) -> str:
    request = ChatRequest(
        messages=({"role": "user", "content": prompt},),
        temperature=0.001,
        max_tokens=1024,
    )
    try:
        return judge.chat(request).text
    except (BackendError, ScriptError) as exc:
        raise JudgeError(f"judge backend failed: {exc}") from exc


def _ask_with_retries(judge: ChatBackend, prompt: str, parse, what: str):
    last = ""
    for _ in range(1 + JUDGE_RETRIES):
        last = _call_judge(judge, prompt)
        parsed = parse(last)
        if parsed is not None:
            return parsed
    raise JudgeError(f"judge output unparseable as {what}: {last[:120]!r}")


def decompose_statements(text: str, judge: ChatBackend) -> list[str]:
    """Split text into atomic factual statements via the judge.

    Empty text returns [] without a judge call; a judge reply with no
    numbered list is retried and eventually raises JudgeError.
    """
    if not text.strip():
        return []

    def parse(reply: str) -> list[str] | None:
        statements = [
            m.group(1) for line in reply.splitlines() if (m := _NUMBERED_RE.match(line))
        ]
        return statements or None

    return _ask_with_retries(
        judge, DECOMPOSE_PROMPT.format(text=text), parse, "a numbered statement list"
    )


def _parse_verdict(reply: str) -> tuple[bool, str] | None:
    match = _YES_NO_RE.search(reply)
    if not match:
        return None
    return match.group(1).lower() == "yes", reply.strip()


def _judge_statements(
    judge: ChatBackend, template: str, context: str, statements: list[str]
) -> list[StatementVerdict]:
    verdicts = []
    for statement in statements:
        prompt = template.format(context=context, statement=statement)
        verdict, rationale = _ask_with_retries(
            judge, prompt, _parse_verdict, "a yes/no verdict"
        )
        verdicts.append(StatementVerdict(statement, verdict, rationale))
    return verdicts


def faithfulness(
    answer: str, contexts: list[str], judge: ChatBackend
) -> MetricScore:
    """Fraction of answer statements supported by the contexts.

    Undefined when the answer decomposes to no statements or no contexts
    were shown to the model.
    """
    if not contexts:
        return MetricScore(None, {"reason": "no contexts"})
    statements = decompose_statements(answer, judge)
    if not statements:
        return MetricScore(None, {"reason": "no statements"})
    verdicts = _judge_statements(
        judge, SUPPORT_PROMPT, "\n\n".join(contexts), statements
    )
    supported = sum(1 for v in verdicts if v.verdict)
    return MetricScore(
        supported / len(verdicts),
        {"verdicts": [v.to_dict() for v in verdicts]},
    )


def context_recall(
    record: QARecord, retrieved_contexts: list[str], judge: ChatBackend
) -> MetricScore:
    """Fraction of ground-truth statements attributable to what was retrieved.

    Nothing retrieved scores 0.0 (recall of an empty retrieval is zero, not
    undefined); a ground truth with no statements is undefined.
    """
    if not retrieved_contexts:
        return MetricScore(0.0, {"reason": "nothing retrieved"})
    statements = decompose_statements(record.ground_truth_answer, judge)
    if not statements:
        return MetricScore(None, {"reason": "no statements"})
    verdicts = _judge_statements(
        judge, ATTRIBUTION_PROMPT, "\n\n".join(retrieved_contexts), statements
    )
    attributable = sum(1 for v in verdicts if v.verdict)
    return MetricScore(
        attributable / len(verdicts),
        {"verdicts": [v.to_dict() for v in verdicts]},
    )


def _numbered(statements: list[str]) -> str:
    return "\n".join(f"{i}. {s}" for i, s in enumerate(statements, start=1))


_LABEL_LINE_RE = re.compile(r"^\s*(ANSWER|GROUND)\s*:\s*(.*)$", re.IGNORECASE)


def _parse_classification(
    reply: str, n_answer: int, n_ground: int
) -> tuple[list[str], list[str]] | None:
    sides: dict[str, list[str]] = {}
    for line in reply.splitlines():
        match = _LABEL_LINE_RE.match(line)
        if match:
            labels = [part.strip().upper() for part in match.group(2).split(",") if part.strip()]
            sides[match.group(1).upper()] = labels
    answer = sides.get("ANSWER")
    ground = sides.get("GROUND")
    if answer is None or ground is None:
        return None
    if len(answer) != n_answer or len(ground) != n_ground:
        return None
    if any(lab not in ("TP", "FP") for lab in answer):
        return None
    if any(lab not in ("TP", "FN") for lab in ground):
        return None
    return answer, ground


def answer_correctness(
    answer: str,
    ground_truth: str,
    judge: ChatBackend,
    embedder: Embedder,
) -> MetricScore:
    """Weighted blend of statement-level factual F1 and embedding similarity.

    F1 = TP / (TP + 0.5*(FP+FN)), defined as 0 when TP+FP+FN == 0 and the
    texts differ, 1 when both texts are empty; the blend is
    0.75*F1 + 0.25*max(0, cosine).
    """
    answer_statements = decompose_statements(answer, judge)
    ground_statements = decompose_statements(ground_truth, judge)
    detail: dict = {
        "answer_statements": answer_statements,
        "ground_statements": ground_statements,
    }
    if answer_statements and ground_statements:
        prompt = CLASSIFY_PROMPT.format(
            answer_statements=_numbered(answer_statements),
            ground_statements=_numbered(ground_statements),
        )
        answer_labels, ground_labels = _ask_with_retries(
            judge,
            prompt,
            lambda reply: _parse_classification(
                reply, len(answer_statements), len(ground_statements)
            ),
            "a TP/FP/FN classification",
        )
        tp = sum(1 for lab in answer_labels if lab == "TP")
        fp = sum(1 for lab in answer_labels if lab == "FP")
        fn = sum(1 for lab in ground_labels if lab == "FN")
        detail["answer_labels"] = answer_labels
        detail["ground_labels"] = ground_labels
    else:
        # One or both sides decompose to nothing: the classification is
        # forced, no judge call needed.
        tp = 0
        fp = len(answer_statements)
        fn = len(ground_statements)
    if tp + fp + fn == 0:
        f1 = 1.0 if not answer.strip() and not ground_truth.strip() else 0.0
    else:
        f1 = tp / (tp + 0.5 * (fp + fn))
    similarity = max(
        0.0, cosine_similarity(embedder.embed(answer), embedder.embed(ground_truth))
    )
    detail.update({"tp": tp, "fp": fp, "fn": fn, "f1": f1, "similarity": similarity})
    return MetricScore(F1_WEIGHT * f1 + SIMILARITY_WEIGHT * similarity, detail)


def round_half_up(value: float, places: int = 2) -> float:
    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def attainment(agent_value: float, rag_value: float) -> float | None:
    """Agent metric as a percent of the RAG metric, half-up to 2 decimals;
    undefined (None) when the RAG value is zero."""
    if agent_value < 0 or rag_value < 0:
        raise ValueError("metric values must be >= 0")
    if rag_value == 0:
        return None
    return round_half_up(100.0 * agent_value / rag_value)


@dataclass(frozen=True)
class RunStats:
    mean: float
    stddev: float


def aggregate_runs(values: list[float]) -> RunStats:
    """Arithmetic mean and sample standard deviation (n-1 denominator;
    0 for a single run).  Full precision; rounding happens in reports."""
    if not values:
        raise ValueError("aggregate_runs requires at least one value")
    n = len(values)
    mean = sum(values) / n
    if n == 1:
        return RunStats(mean=mean, stddev=0.0)
    variance = sum((v - mean) ** 2 for v in values) / (n - 1)
    return RunStats(mean=mean, stddev=math.sqrt(variance))


@dataclass(frozen=True)
class AttainmentCell:
    agent: float | None
    rag: float | None
    attainment_pct: float | None
    delta: float | None


@dataclass(frozen=True)
class AttainmentRow:
    dataset: str
    cells: dict[str, AttainmentCell]


@dataclass(frozen=True)
class AttainmentReport:
    metrics: tuple[str, ...]
    rows: tuple[AttainmentRow, ...]
    averages: dict[str, float | None]


def build_attainment_report(
    pairs: list[tuple[str, dict[str, tuple[float | None, float | None]]]],
    metrics: tuple[str, ...] | None = None,
) -> AttainmentReport:
    """Build per-dataset attainment rows plus a column-average row.

    ``pairs`` maps each dataset name to {metric: (agent_value, rag_value)};
    averages are arithmetic means of the rounded column attainments, rounded
    half-up to 2 decimals, skipping undefined cells.
    """
    if metrics is None:
        ordered: list[str] = []
        for _, cells in pairs:
            for metric in cells:
                if metric not in ordered:
                    ordered.append(metric)
        metrics = tuple(ordered)
    rows = []
    for dataset, cells in pairs:
        row_cells = {}
        for metric in metrics:
            if metric not in cells:
                continue
            agent_value, rag_value = cells[metric]
            if agent_value is None or rag_value is None:
                cell = AttainmentCell(agent_value, rag_value, None, None)
            else:
                cell = AttainmentCell(
                    agent=agent_value,
                    rag=rag_value,
                    attainment_pct=attainment(agent_value, rag_value),
                    # + 0.0 normalizes a rounded -0.0 to 0.0
                    delta=round_half_up(agent_value - rag_value) + 0.0,
                )
            row_cells[metric] = cell
        rows.append(AttainmentRow(dataset=dataset, cells=row_cells))
    averages: dict[str, float | None] = {}
    for metric in metrics:
        column = [
            row.cells[metric].attainment_pct
            for row in rows
            if metric in row.cells and row.cells[metric].attainment_pct is not None
        ]
        averages[metric] = round_half_up(sum(column) / len(column)) if column else None
    return AttainmentReport(metrics=metrics, rows=tuple(rows), averages=averages)
