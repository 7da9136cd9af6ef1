import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cotgate.errors import DegenerateCandidateError
from cotgate.segmentation import (
    LineCursor,
    ParsedCandidate,
    advance,
    is_indentation_token,
    parse_candidate,
    split_reasoning_and_code,
)

_TAIL_INDENT = re.compile(r"[ \t]*\Z")


def cursor_oracle(text: str) -> LineCursor:
    """Ground truth from the concatenated text: the state only depends on
    what follows the last newline."""
    tail = text[text.rfind("\n") + 1 :]
    if _TAIL_INDENT.fullmatch(tail):
        return LineCursor(pending_whitespace=tail, at_line_start=True)
    return LineCursor(pending_whitespace="", at_line_start=False)


token_texts = st.text(alphabet=list("ab #\t\n"), min_size=1, max_size=6)


class TestIsIndentationToken:
    def test_accepts_space_and_tab_runs(self):
        assert is_indentation_token(" ")
        assert is_indentation_token("    ")
        assert is_indentation_token("\t")
        assert is_indentation_token(" \t ")

    def test_rejects_everything_else(self):
        assert not is_indentation_token("")
        assert not is_indentation_token("\n")
        assert not is_indentation_token("  x")
        assert not is_indentation_token("x")
        assert not is_indentation_token(" \n")


class TestAdvance:
    def test_empty_token_is_identity(self):
        cursor = LineCursor("  ", True)
        assert advance(cursor, "") == cursor

    def test_indentation_accumulates_at_line_start(self):
        cursor = LineCursor()
        cursor = advance(cursor, "  ")
        cursor = advance(cursor, "\t")
        assert cursor == LineCursor("  \t", True)

    def test_content_leaves_line_start(self):
        cursor = advance(LineCursor("  ", True), "def")
        assert cursor == LineCursor("", False)

    def test_newline_tail_rules(self):
        assert advance(LineCursor("", False), "x\n") == LineCursor("", True)
        assert advance(LineCursor("", False), "x\n  ") == LineCursor("  ", True)
        assert advance(LineCursor("", False), "x\ny") == LineCursor("", False)

    @given(st.lists(token_texts, max_size=12))
    def test_matches_text_oracle(self, tokens):
        cursor = LineCursor()
        for token in tokens:
            cursor = advance(cursor, token)
        assert cursor == cursor_oracle("".join(tokens))


class TestParseCandidate:
    def test_reasoning_then_code(self):
        text = "# think first\n# then decide\n    return 1\nleftover\n"
        parsed = parse_candidate(text)
        assert parsed.reasoning == ("# think first", "# then decide")
        assert parsed.code_line == "    return 1\n"
        assert text[parsed.code_start : parsed.code_end] == parsed.code_line

    def test_code_without_reasoning(self):
        parsed = parse_candidate("    return 1\n")
        assert parsed.reasoning == ()
        assert parsed.code_line == "    return 1\n"

    def test_blank_lines_are_skipped(self):
        parsed = parse_candidate("\n   \n# a\n\n    x = 1\n")
        assert parsed.reasoning == ("# a",)
        assert parsed.code_line == "    x = 1\n"

    def test_indented_comment_counts_as_reasoning(self):
        parsed = parse_candidate("    # inline thought\n    y = 2\n")
        assert parsed.reasoning == ("    # inline thought",)
        assert parsed.code_line == "    y = 2\n"

    def test_final_line_without_newline(self):
        parsed = parse_candidate("# a\n    return 3")
        assert parsed.code_line == "    return 3"
        assert parsed.code_end == len("# a\n    return 3")

    def test_comments_only_is_degenerate(self):
        with pytest.raises(DegenerateCandidateError):
            parse_candidate("# just\n# comments\n")

    def test_empty_is_degenerate(self):
        with pytest.raises(DegenerateCandidateError):
            parse_candidate("")
        with pytest.raises(DegenerateCandidateError):
            parse_candidate("\n  \n")

    def test_custom_comment_prefix(self):
        parsed = parse_candidate("// note\nx = 1\n", comment_prefix="//")
        assert parsed.reasoning == ("// note",)
        assert parsed.code_line == "x = 1\n"

    def test_empty_comment_prefix_rejected(self):
        with pytest.raises(ValueError):
            parse_candidate("x = 1\n", comment_prefix="")

    @given(
        st.lists(
            st.text(alphabet=list("ab #\t"), min_size=0, max_size=8), max_size=8
        ),
    )
    def test_span_always_matches_code_line(self, lines):
        text = "".join(line + "\n" for line in lines)
        try:
            parsed = parse_candidate(text)
        except DegenerateCandidateError:
            # Then no line has content that is not a comment.
            for line in lines:
                stripped = line.strip()
                assert not stripped or stripped.startswith("#")
            return
        assert text[parsed.code_start : parsed.code_end] == parsed.code_line
        stripped = parsed.code_line.strip()
        assert stripped and not stripped.startswith("#")

    def test_wrapper_shape(self):
        reasoning, code = split_reasoning_and_code("# r\nx = 1\n")
        assert reasoning == ["# r"]
        assert code == "x = 1\n"
