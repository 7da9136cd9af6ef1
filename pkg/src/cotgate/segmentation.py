"""Line-start tracking over a token stream and candidate parsing.

Measurement points live on text, not token ids, because tokenizers differ
across backends. A position is a measurement point when everything emitted
since the last newline is indentation, i.e. the concatenated text so far
matches (^|...\\n)[ \\t]*$.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DegenerateCandidateError

_INDENT_CHARS = frozenset(" \t")


def is_indentation_token(token_text: str) -> bool:
    """True for non-empty runs of spaces and/or tabs, nothing else."""
    return bool(token_text) and all(c in _INDENT_CHARS for c in token_text)


def _is_indent_text(text: str) -> bool:
    return all(c in _INDENT_CHARS for c in text)


@dataclass(frozen=True)
class LineCursor:
    """Tracks whether the emission point sits at the start of a line."""

    pending_whitespace: str = ""
    at_line_start: bool = True


def advance(cursor: LineCursor, token_text: str) -> LineCursor:
    """Fold one emitted token into the cursor.

    A token containing a newline resets the cursor to whatever follows its
    last newline: empty or pure indentation keeps the line-start state, any
    other tail leaves it mid-line. Tokens without newlines stay at line start
    only while they are pure indentation.
    """
    if not token_text:
        return cursor
    nl = token_text.rfind("\n")
    if nl >= 0:
        tail = token_text[nl + 1 :]
        if _is_indent_text(tail):
            return LineCursor(pending_whitespace=tail, at_line_start=True)
        return LineCursor(pending_whitespace="", at_line_start=False)
    if cursor.at_line_start and is_indentation_token(token_text):
        return LineCursor(
            pending_whitespace=cursor.pending_whitespace + token_text,
            at_line_start=True,
        )
    if cursor.at_line_start:
        return LineCursor(pending_whitespace="", at_line_start=False)
    return cursor


@dataclass(frozen=True)
class ParsedCandidate:
    """A sampled completion split into reasoning comments and one code line.

    `code_start`/`code_end` give the code line's character span inside the
    original completion text, so callers can map it back to token events.
    """

    reasoning: tuple[str, ...]
    code_line: str
    code_start: int
    code_end: int


def parse_candidate(completion_text: str, comment_prefix: str = "#") -> ParsedCandidate:
    """Split a completion into leading comment lines and the first code line.

    Comment lines (first non-whitespace characters start with
    `comment_prefix`) become the reasoning path. Blank lines are skipped.
    The first other line is the code line, kept verbatim with indentation
    and, when present, its trailing newline; the rest of the completion is
    discarded.
    """
    if not comment_prefix:
        raise ValueError("comment_prefix must be non-empty")
    reasoning: list[str] = []
    pos = 0
    n = len(completion_text)
    while pos < n:
        nl = completion_text.find("\n", pos)
        end = n if nl < 0 else nl + 1
        line = completion_text[pos:end]
        stripped = line.strip()
        if not stripped:
            pos = end
            continue
        if stripped.startswith(comment_prefix):
            reasoning.append(line.rstrip("\n"))
            pos = end
            continue
        return ParsedCandidate(tuple(reasoning), line, pos, end)
    raise DegenerateCandidateError("completion contains no code line")


def split_reasoning_and_code(
    completion_text: str, comment_prefix: str = "#"
) -> tuple[list[str], str]:
    """Contract-shaped wrapper around `parse_candidate`."""
    parsed = parse_candidate(completion_text, comment_prefix)
    return list(parsed.reasoning), parsed.code_line
