"""Page-aware regex search over a document collection.

Pages are split into lines on newline; matching is per line with grep-style
context windows.  The supported regex dialect is a Perl-compatible subset:
alternation, character classes, quantifiers, anchors, escapes and grouping,
but no backreferences and no lookbehind.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .corpus import DocumentCollection

DEFAULT_MAX_MATCHES = 100
TRUNCATION_MARKER = "…truncated"


class PatternError(Exception):
    """Invalid or unsupported regex; the message is safe to show an agent."""


@dataclass(frozen=True)
class SearchQuery:
    pattern: str
    case_insensitive: bool = False
    context_lines: int = 0
    page_range: tuple[int, int] | None = None
    doc_filter: str | None = None
    max_matches: int = DEFAULT_MAX_MATCHES

    def __post_init__(self) -> None:
        if not self.pattern:
            raise ValueError("pattern must be non-empty")
        if self.context_lines < 0:
            raise ValueError("context_lines must be >= 0")
        if self.max_matches < 1:
            raise ValueError("max_matches must be >= 1")
        if self.page_range is not None:
            start, end = self.page_range
            if start < 1 or start > end:
                raise ValueError(f"invalid page_range {self.page_range}")


@dataclass(frozen=True)
class SearchMatch:
    doc_id: str
    page_number: int
    line_number: int
    line_text: str
    context_before: tuple[str, ...] = ()
    context_after: tuple[str, ...] = ()


@dataclass(frozen=True)
class SearchResult:
    matches: tuple[SearchMatch, ...]
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.matches)


def _scan_unsupported(pattern: str) -> None:
    # Walk the pattern tracking escapes and character classes so that
    # literals like "\\1" or "[(?<]" do not trip the check.
    i, in_class = 0, False
    while i < len(pattern):
        ch = pattern[i]
        if ch == "\\":
            nxt = pattern[i + 1] if i + 1 < len(pattern) else ""
            if not in_class and nxt.isdigit() and nxt != "0":
                raise PatternError("backreferences are not supported")
            i += 2
            continue
        if in_class:
            if ch == "]":
                in_class = False
        elif ch == "[":
            in_class = True
        elif ch == "(" and pattern.startswith(("(?P=", "(?<=", "(?<!"), i):
            if pattern.startswith("(?P=", i):
                raise PatternError("backreferences are not supported")
            raise PatternError("lookbehind is not supported")
        i += 1


def compile_pattern(pattern: str, case_insensitive: bool = False) -> re.Pattern[str]:
    """Compile ``pattern`` in the supported dialect or raise PatternError."""
    _scan_unsupported(pattern)
    flags = re.IGNORECASE if case_insensitive else 0
    try:
        return re.compile(pattern, flags)
    except re.error as exc:
        raise PatternError(str(exc)) from exc


def _doc_matches_filter(doc_id: str, doc_filter: str | None) -> bool:
    if doc_filter is None:
        return True
    return doc_id == doc_filter or doc_id.startswith(doc_filter)


def search(collection: DocumentCollection, query: SearchQuery) -> SearchResult:
    """Run ``query`` over ``collection``.

    Matches are ordered by (doc_id, page_number, line_number); filters apply
    before matching; at most ``max_matches`` matches are returned, with
    ``truncated`` set when more existed.
    """
    regex = compile_pattern(query.pattern, query.case_insensitive)
    matches: list[SearchMatch] = []
    truncated = False
    for doc in collection.documents:
        if truncated:
            break
        if not _doc_matches_filter(doc.doc_id, query.doc_filter):
            continue
        for page in doc.pages:
            if query.page_range is not None:
                start, end = query.page_range
                if not (start <= page.page_number <= end):
                    continue
            lines = page.text.split("\n")
            for idx, line in enumerate(lines):
                if not regex.search(line):
                    continue
                if len(matches) >= query.max_matches:
                    truncated = True
                    break
                lo = max(0, idx - query.context_lines)
                hi = min(len(lines), idx + 1 + query.context_lines)
                matches.append(
                    SearchMatch(
                        doc_id=doc.doc_id,
                        page_number=page.page_number,
                        line_number=idx + 1,
                        line_text=line,
                        context_before=tuple(lines[lo:idx]),
                        context_after=tuple(lines[idx + 1 : hi]),
                    )
                )
            if truncated:
                break
    return SearchResult(matches=tuple(matches), truncated=truncated)


@dataclass
class _Block:
    doc_id: str
    page_number: int
    # line number -> (text, is_match)
    lines: dict[int, tuple[str, bool]] = field(default_factory=dict)
    start: int = 0
    end: int = 0


def render_matches(
    matches: tuple[SearchMatch, ...] | list[SearchMatch],
    context_lines: int | None = None,
    truncated: bool = False,
) -> str:
    """Render matches as ``<doc_id>:Page <p>: <line>`` observation text.

    Context lines use a ``-`` separator after the page number.  Overlapping
    context windows on the same page merge into one block with no duplicated
    lines.  ``context_lines`` caps how much stored context is rendered; None
    renders all of it.
    """
    blocks: list[_Block] = []
    for match in matches:
        before = list(match.context_before)
        after = list(match.context_after)
        if context_lines is not None:
            before = before[len(before) - min(len(before), context_lines):]
            after = after[: context_lines]
        start = match.line_number - len(before)
        end = match.line_number + len(after)
        block = None
        if blocks:
            last = blocks[-1]
            if (
                last.doc_id == match.doc_id
                and last.page_number == match.page_number
                and start <= last.end + 1
            ):
                block = last
        if block is None:
            block = _Block(doc_id=match.doc_id, page_number=match.page_number, start=start)
            blocks.append(block)
        for offset, text in enumerate(before):
            block.lines.setdefault(start + offset, (text, False))
        block.lines[match.line_number] = (match.line_text, True)
        for offset, text in enumerate(after, start=1):
            block.lines.setdefault(match.line_number + offset, (text, False))
        block.end = max(block.end, end)
    out: list[str] = []
    for block in blocks:
        for line_no in sorted(block.lines):
            text, is_match = block.lines[line_no]
            sep = ":" if is_match else "-"
            out.append(f"{block.doc_id}:Page {block.page_number}{sep} {text}")
    if truncated:
        out.append(TRUNCATION_MARKER)
    return "\n".join(out)
