"""Agentic question answering over a document collection.

The loop always starts by printing the corpus metadata table, then alternates
LLM replies (Thought / Action: terminal / Action Input: <command>) with
observations until a Final Answer arrives or the iteration budget runs out.
Commands are interpreted by an internal whitelist — ``sh pdfmetadata.sh``,
``rga`` and ``pdfgrep`` — and never reach a real shell.
"""

from __future__ import annotations

import re
import shlex
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Union

from .corpus import DocumentCollection, corpus_metadata
from .llm import ChatBackend, ChatRequest
from .search import (
    DEFAULT_MAX_MATCHES,
    PatternError,
    SearchQuery,
    render_matches,
    search,
)

METADATA_COMMAND = "sh pdfmetadata.sh"
NO_MATCH_OBSERVATION = "[no matches]"
ELIDED_OBSERVATION = "[observation elided]"

ALLOWED_COMMANDS_HELP = "sh pdfmetadata.sh, rga, pdfgrep"

# Command-chaining characters are rejected anywhere outside a quoted pattern.
_SHELL_METACHARACTERS = frozenset(";&|<>`$()\n\r")

AGENT_SYSTEM_PROMPT = """\
You answer questions about a folder of documents by running read-only search
commands and reasoning over their output. Only these commands are accepted:

sh pdfmetadata.sh
    Prints one metadata row per file (title, author, pages, size). The run
    always starts from this listing; use it to decide where to search.

rga [-i] [-C N] 'PATTERN' ./files/
    Keyword and regex search across files. Alternation tries several
    keywords at once, e.g. rga -i 'term1|term2|term3' ./files/
    -i ignores case; -C N returns N lines of context around each hit.

pdfgrep [-inrP] [--page-range A-B] [-C N] '(PATTERN)' ./files/NAME.pdf
    Page-targeted search in one file or the whole folder. Wrap the pattern
    in parentheses. -n adds page numbers, -r recurses into the folder,
    -P enables Perl-style patterns, --page-range A-B limits the pages.

Tips:
- Ask for context with -C 5 so hits come back with surrounding lines.
- If a complex pattern finds nothing, retry with simpler keywords.
- Always wrap the pattern in single quotes.

Reply with exactly one step per message, in this format:

Thought: <your reasoning>
Action: terminal
Action Input: <one command>

or, once the gathered evidence answers the question:

Thought: <your reasoning>
Final Answer: <answer>
"""

FORCE_ANSWER_INSTRUCTION = (
    "The search budget is used up. Using only the transcript above, give your "
    "best final answer to the question now. Reply with the answer text only."
)

CONTINUE_INSTRUCTION = (
    "Continue. Reply with the next Thought and Action, or the Final Answer."
)


class ParseError(Exception):
    """LLM reply had no usable Thought/Action/Final Answer structure."""


class CommandError(Exception):
    """Command rejected by the whitelist interpreter."""


@dataclass(frozen=True)
class MetadataAction:
    command: str = METADATA_COMMAND


@dataclass(frozen=True)
class SearchAction:
    command: str
    query: SearchQuery


@dataclass(frozen=True)
class FinalAnswerAction:
    text: str


AgentAction = Union[MetadataAction, SearchAction, FinalAnswerAction]


class TerminatedBy(str, Enum):
    FINAL_ANSWER = "FinalAnswer"
    BUDGET_EXHAUSTED = "BudgetExhausted"
    FATAL_PARSE = "FatalParse"


@dataclass(frozen=True)
class AgentStep:
    iteration: int
    thought: str
    action: AgentAction
    observation: str


@dataclass(frozen=True)
class AgentEpisode:
    question: str
    steps: tuple[AgentStep, ...]
    evidence_contexts: tuple[str, ...]
    final_answer: str | None
    t_max: int
    terminated_by: TerminatedBy
    elapsed_ms: int = 0


@dataclass(frozen=True)
class AgentConfig:
    t_max: int = 15
    max_parse_retries: int = 3
    prompt_char_budget: int = 200_000
    max_matches: int = DEFAULT_MAX_MATCHES
    temperature: float = 0.001
    max_tokens: int = 1024

    def __post_init__(self) -> None:
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if self.max_parse_retries < 1:
            raise ValueError("max_parse_retries must be >= 1")


def _scan_metacharacters(command: str) -> None:
    quote: str | None = None
    for ch in command:
        if quote:
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch in _SHELL_METACHARACTERS:
            raise CommandError(f"shell metacharacter {ch!r} is not allowed")


def _parse_page_range(value: str) -> tuple[int, int]:
    m = re.fullmatch(r"(\d+)-(\d+)", value)
    if not m:
        raise CommandError(f"--page-range expects A-B page numbers, got {value!r}")
    start, end = int(m.group(1)), int(m.group(2))
    if start < 1 or start > end:
        raise CommandError(f"--page-range {value!r} is not a valid 1-based range")
    return (start, end)


def _doc_filter_from_path(path: str | None) -> str | None:
    if path is None:
        return None
    cleaned = path[2:] if path.startswith("./") else path
    if cleaned.startswith(("/", "~")):
        raise CommandError(f"path {path!r} is outside the document folder")
    if any(part == ".." for part in cleaned.split("/")):
        raise CommandError(f"path {path!r} may not leave the document folder")
    if cleaned in ("", "."):
        return None
    return cleaned


_FLAG_LETTERS = {"rga": "iC", "pdfgrep": "inrPC"}


def _parse_search_command(
    head: str, tokens: list[str], max_matches: int
) -> SearchQuery:
    allowed = _FLAG_LETTERS[head]
    case_insensitive = False
    context_lines = 0
    page_range: tuple[int, int] | None = None
    positionals: list[str] = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.startswith("--"):
            name, _, attached = tok.partition("=")
            if name != "--page-range":
                raise CommandError(f"unknown flag {name!r}")
            if head != "pdfgrep":
                raise CommandError("--page-range is only supported by pdfgrep")
            if attached:
                value = attached
            else:
                i += 1
                if i >= len(tokens):
                    raise CommandError("--page-range requires a value like 1-4")
                value = tokens[i]
            page_range = _parse_page_range(value)
        elif tok.startswith("-") and len(tok) > 1:
            j = 1
            while j < len(tok):
                ch = tok[j]
                if ch not in allowed:
                    raise CommandError(f"unknown flag '-{ch}' for {head}")
                if ch == "i":
                    case_insensitive = True
                elif ch == "C":
                    value = tok[j + 1 :]
                    if not value:
                        i += 1
                        if i >= len(tokens):
                            raise CommandError("-C requires a line count")
                        value = tokens[i]
                    if not value.isdigit():
                        raise CommandError(f"-C requires a non-negative count, got {value!r}")
                    context_lines = int(value)
                    break
                j += 1
        else:
            positionals.append(tok)
        i += 1
    if not positionals:
        raise CommandError(f"{head} requires a quoted search pattern")
    if len(positionals) > 2:
        raise CommandError(f"unexpected argument {positionals[2]!r}")
    pattern = positionals[0]
    if not pattern:
        raise CommandError(f"{head} requires a non-empty pattern")
    path = positionals[1] if len(positionals) > 1 else None
    return SearchQuery(
        pattern=pattern,
        case_insensitive=case_insensitive,
        context_lines=context_lines,
        page_range=page_range,
        doc_filter=_doc_filter_from_path(path),
        max_matches=max_matches,
    )


def parse_command(command: str, max_matches: int = DEFAULT_MAX_MATCHES) -> AgentAction:
    """Interpret one whitelisted terminal command.

    Pattern text stays data: nothing here ever reaches a shell or the
    filesystem.  Raises CommandError for anything outside the whitelist.
    """
    stripped = command.strip()
    if not stripped:
        raise CommandError(f"empty command; allowed commands: {ALLOWED_COMMANDS_HELP}")
    _scan_metacharacters(stripped)
    try:
        tokens = shlex.split(stripped)
    except ValueError as exc:
        raise CommandError(f"could not tokenize command: {exc}") from exc
    if not tokens:
        raise CommandError(f"empty command; allowed commands: {ALLOWED_COMMANDS_HELP}")
    head = tokens[0]
    if head == "sh":
        target = tokens[1] if len(tokens) == 2 else ""
        if target.startswith("./"):
            target = target[2:]
        if target != "pdfmetadata.sh":
            raise CommandError("sh may only run pdfmetadata.sh")
        return MetadataAction(command=stripped)
    if head in ("pdfmetadata.sh", "./pdfmetadata.sh"):
        if len(tokens) != 1:
            raise CommandError("pdfmetadata.sh takes no arguments")
        return MetadataAction(command=stripped)
    if head in ("rga", "pdfgrep"):
        query = _parse_search_command(head, tokens[1:], max_matches)
        return SearchAction(command=stripped, query=query)
    raise CommandError(
        f"unknown command {head!r}; allowed commands: {ALLOWED_COMMANDS_HELP}"
    )


_THOUGHT_RE = re.compile(r"^\s*Thought\s*:\s*(.*)$", re.IGNORECASE | re.MULTILINE)
_ACTION_RE = re.compile(r"^\s*Action\s*:\s*(.*)$", re.IGNORECASE | re.MULTILINE)
_ACTION_INPUT_RE = re.compile(r"^\s*Action Input\s*:\s*(.*)$", re.IGNORECASE | re.MULTILINE)
_FINAL_ANSWER_RE = re.compile(r"^\s*Final Answer\s*:\s*", re.IGNORECASE | re.MULTILINE)


def parse_llm_step(
    reply: str, max_matches: int = DEFAULT_MAX_MATCHES
) -> tuple[str, AgentAction]:
    """Split one LLM reply into (thought, action).

    Raises ParseError when the reply carries neither an action nor a final
    answer, or both; command text is handed to :func:`parse_command`.
    """
    thought_match = _THOUGHT_RE.search(reply)
    thought = thought_match.group(1).strip() if thought_match else ""
    final_match = _FINAL_ANSWER_RE.search(reply)
    input_match = _ACTION_INPUT_RE.search(reply)
    action_match = _ACTION_RE.search(reply)
    if final_match and (input_match or action_match):
        raise ParseError("reply contains both an action and a final answer")
    if final_match:
        return thought, FinalAnswerAction(text=reply[final_match.end():].strip())
    if action_match:
        tool = action_match.group(1).strip().strip("\"'").lower()
        if tool != "terminal":
            raise ParseError(f"unknown tool {tool!r}; the only tool is 'terminal'")
    if not input_match:
        raise ParseError("no actionable content: expected Action Input or Final Answer")
    command = input_match.group(1).strip()
    return thought, parse_command(command, max_matches=max_matches)


@dataclass
class _TranscriptEntry:
    kind: str  # "metadata" | "search" | "note"
    thought: str
    lead: str | None  # "Action Input: ..." line, None for notes
    observation: str
    elided: bool = False


def _render_entry(entry: _TranscriptEntry) -> str:
    parts = []
    if entry.thought:
        parts.append(f"Thought: {entry.thought}")
    if entry.lead is not None:
        parts.append(entry.lead)
    observation = ELIDED_OBSERVATION if entry.elided else entry.observation
    parts.append(f"Observation: {observation}")
    return "\n".join(parts)


def _build_messages(
    question: str,
    transcript: list[_TranscriptEntry],
    char_budget: int,
    force_answer: bool = False,
) -> tuple[dict[str, str], ...]:
    closing = FORCE_ANSWER_INSTRUCTION if force_answer else CONTINUE_INSTRUCTION

    def assemble() -> str:
        blocks = [f"Question: {question}", ""]
        blocks.extend(_render_entry(e) for e in transcript)
        blocks.append("")
        blocks.append(closing)
        return "\n".join(blocks)

    body = assemble()
    # Oldest search observations give way first; the question and the
    # metadata listing are never dropped.
    for entry in transcript:
        if len(body) <= char_budget:
            break
        if entry.kind == "search" and not entry.elided:
            entry.elided = True
            body = assemble()
    return (
        {"role": "system", "content": AGENT_SYSTEM_PROMPT},
        {"role": "user", "content": body},
    )


def _strip_answer_marker(reply: str) -> str:
    match = _FINAL_ANSWER_RE.search(reply)
    if match:
        return reply[match.end():].strip()
    return reply.strip()


def run_agent(
    question: str,
    collection: DocumentCollection,
    llm: ChatBackend,
    config: AgentConfig | None = None,
) -> AgentEpisode:
    """Run one question through the search loop and return the episode.

    Step 0 is always the metadata listing, executed without consulting the
    LLM and free of the iteration budget.  Parse failures are fed back as
    corrective observations and do not consume iterations; after
    ``max_parse_retries`` consecutive failures the episode ends FatalParse.
    When the budget runs out, one forced LLM call produces the final answer.
    """
    config = config or AgentConfig()
    deterministic = bool(getattr(llm, "deterministic", False))
    started = time.perf_counter()

    metadata_table = corpus_metadata(collection).rendered
    steps: list[AgentStep] = [
        AgentStep(iteration=0, thought="", action=MetadataAction(), observation=metadata_table)
    ]
    transcript: list[_TranscriptEntry] = [
        _TranscriptEntry("metadata", "", f"Action Input: {METADATA_COMMAND}", metadata_table)
    ]
    evidence: list[str] = []
    final_answer: str | None = None
    terminated: TerminatedBy | None = None
    parse_failures = 0
    llm_steps = 0

    def ask(force_answer: bool = False) -> str:
        messages = _build_messages(
            question, transcript, config.prompt_char_budget, force_answer=force_answer
        )
        request = ChatRequest(
            messages=messages,
            temperature=config.temperature,
            max_tokens=config.max_tokens,
        )
        return llm.chat(request).text

    while llm_steps < config.t_max:
        reply = ask()
        try:
            thought, action = parse_llm_step(reply, max_matches=config.max_matches)
        except (ParseError, CommandError) as exc:
            parse_failures += 1
            if parse_failures >= config.max_parse_retries:
                terminated = TerminatedBy.FATAL_PARSE
                break
            transcript.append(
                _TranscriptEntry(
                    "note",
                    "",
                    None,
                    f"Your previous reply could not be used: {exc}. Reply with "
                    "Thought, Action: terminal and Action Input, or a Final Answer.",
                )
            )
            continue
        parse_failures = 0
        llm_steps += 1
        if isinstance(action, FinalAnswerAction):
            steps.append(AgentStep(len(steps), thought, action, ""))
            final_answer = action.text
            terminated = TerminatedBy.FINAL_ANSWER
            break
        if isinstance(action, MetadataAction):
            observation = metadata_table
            kind = "metadata"
        else:
            kind = "search"
            try:
                result = search(collection, action.query)
            except PatternError as exc:
                observation = f"Invalid pattern: {exc}"
            else:
                if result.matches:
                    display = tuple(
                        replace(m, doc_id="./" + m.doc_id) for m in result.matches
                    )
                    observation = render_matches(display, truncated=result.truncated)
                    if observation not in evidence:
                        evidence.append(observation)
                else:
                    observation = NO_MATCH_OBSERVATION
        steps.append(AgentStep(len(steps), thought, action, observation))
        transcript.append(
            _TranscriptEntry(kind, thought, f"Action Input: {action.command}", observation)
        )

    if terminated is None:
        reply = ask(force_answer=True)
        final_answer = _strip_answer_marker(reply)
        terminated = TerminatedBy.BUDGET_EXHAUSTED

    elapsed_ms = 0 if deterministic else int((time.perf_counter() - started) * 1000)
    return AgentEpisode(
        question=question,
        steps=tuple(steps),
        evidence_contexts=tuple(evidence),
        final_answer=final_answer,
        t_max=config.t_max,
        terminated_by=terminated,
        elapsed_ms=elapsed_ms,
    )


def _action_to_dict(action: AgentAction) -> dict:
    if isinstance(action, MetadataAction):
        return {"type": "metadata", "command": action.command}
    if isinstance(action, SearchAction):
        query = action.query
        return {
            "type": "search",
            "command": action.command,
            "query": {
                "pattern": query.pattern,
                "case_insensitive": query.case_insensitive,
                "context_lines": query.context_lines,
                "page_range": list(query.page_range) if query.page_range else None,
                "doc_filter": query.doc_filter,
                "max_matches": query.max_matches,
            },
        }
    return {"type": "final_answer", "text": action.text}


def episode_to_dict(episode: AgentEpisode) -> dict:
    """One JSON-ready object per episode."""
    return {
        "question": episode.question,
        "steps": [
            {
                "iteration": step.iteration,
                "thought": step.thought,
                "action": _action_to_dict(step.action),
                "observation": step.observation,
            }
            for step in episode.steps
        ],
        "evidence_contexts": list(episode.evidence_contexts),
        "final_answer": episode.final_answer,
        "t_max": episode.t_max,
        "terminated_by": episode.terminated_by.value,
        "wall_clock_ms": episode.elapsed_ms,
    }
