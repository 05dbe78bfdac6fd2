"""Tokenizer for .aidl sources."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from ..diagnostics import AidlError, Code, Span

KEYWORDS = frozenset({
    "structure", "param", "const", "point", "line", "arc", "circle", "rect", "rectangle",
    "triangle", "constrain", "at", "and",
})
DECL_KEYWORDS = frozenset({"param", "const", "point", "line", "arc", "circle", "rect", "rectangle", "triangle"})
STATEMENT_START = DECL_KEYWORDS | {"structure", "constrain"}


class LexError(AidlError):
    code = Code.SYNTAX

    def __init__(self, message, span):
        super().__init__(message)
        self.span = span


@dataclass(frozen=True)
class Token:
    kind: str        # NUMBER IDENT KEYWORD OP EOF
    text: str
    span: Span
    value: float = 0.0


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>(\#|//)[^\n]*)
  | (?P<number>(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?(deg\b)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|<=|>=|[{}()\[\],.=:;+\-*/<>])
""", re.VERBOSE)


@dataclass
class SourceUnit:
    path: str
    text: str

    def __post_init__(self):
        self.text = self.text.replace("\r\n", "\n").replace("\r", "\n")
        self.lines = self.text.split("\n")

    def end_span(self) -> Span:
        line = len(self.lines)
        col = len(self.lines[-1]) + 1
        return Span(line, col, line, col)


def tokenize(src: SourceUnit, errors: list | None = None) -> list[Token]:
    """Token list ending in EOF.  Without ``errors`` the first bad character
    raises; with it, bad characters are recorded there and skipped so that
    the parser can go on to report later problems too."""
    text = src.text
    pos, line, col = 0, 1, 1
    out = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            err = LexError(f"unexpected character {text[pos]!r}", Span(line, col, line, col + 1))
            if errors is None:
                raise err
            errors.append(err)
            pos, col = pos + 1, col + 1
            continue
        s = m.group(0)
        kind = m.lastgroup
        end_line, end_col = line, col
        for ch in s:
            if ch == "\n":
                end_line, end_col = end_line + 1, 1
            else:
                end_col += 1
        span = Span(line, col, end_line, end_col)
        if kind == "number":
            if s.endswith("deg"):
                out.append(Token("NUMBER", s, span, math.radians(float(s[:-3]))))
            else:
                out.append(Token("NUMBER", s, span, float(s)))
        elif kind == "ident":
            out.append(Token("KEYWORD" if s in KEYWORDS else "IDENT", s, span))
        elif kind == "op":
            out.append(Token("OP", s, span))
        pos = m.end()
        line, col = end_line, end_col
    out.append(Token("EOF", "", Span(line, col, line, col)))
    return out
