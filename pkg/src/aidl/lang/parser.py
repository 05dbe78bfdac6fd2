"""Recursive-descent parser with statement-level error recovery."""

from __future__ import annotations

from typing import Optional

from ..diagnostics import Code, Diagnostic, Span
from . import nodes as N
from .lexer import STATEMENT_START, LexError, SourceUnit, Token, tokenize

MATH_FUNCS = frozenset({"sin", "cos", "arcsin", "asin", "arccos", "acos", "sqrt", "abs", "norm",
                        "square", "min", "max"})
RELATIONS = ("==", "<=", ">=")


class ParseError(Exception):
    def __init__(self, message: str, span: Span, notes=()):
        super().__init__(message)
        self.message = message
        self.span = span
        self.notes = list(notes)


class Parser:
    def __init__(self, src: SourceUnit):
        self.src = src
        lex_errors: list = []
        self.toks: list[Token] = tokenize(src, lex_errors)
        self.i = 0
        self.diags: list[Diagnostic] = [Diagnostic(Code.SYNTAX, e.message, span=e.span, file=src.path)
                                        for e in lex_errors]

    # -- token helpers ---------------------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        return self.tok.kind in ("OP", "KEYWORD") and self.tok.text == text

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "EOF":
            self.i += 1
        return t

    def expect(self, text: str, what: Optional[str] = None) -> Token:
        if self.at(text):
            return self.advance()
        raise ParseError(f"expected {what or repr(text)}, found {self._describe(self.tok)}", self.tok.span)

    def expect_ident(self, what: str) -> Token:
        if self.tok.kind == "IDENT":
            return self.advance()
        raise ParseError(f"expected {what}, found {self._describe(self.tok)}", self.tok.span)

    @staticmethod
    def _describe(t: Token) -> str:
        if t.kind == "EOF":
            return "end of file"
        return f"{t.text!r}"

    def error(self, err: ParseError):
        self.diags.append(Diagnostic(Code.SYNTAX, err.message, span=err.span, file=self.src.path))
        for msg, span in err.notes:
            self.diags.append(Diagnostic(Code.NOTE, msg, severity="note", span=span, file=self.src.path))

    def sync(self, depth_floor=0):
        """Skip to the next statement start or closing brace of the current block."""
        depth = 0
        if self.tok.kind != "EOF":
            self.advance()
        while self.tok.kind != "EOF":
            t = self.tok
            if t.kind == "OP" and t.text == "{":
                depth += 1
            elif t.kind == "OP" and t.text == "}":
                if depth == 0:
                    return
                depth -= 1
            elif depth == 0 and t.kind == "KEYWORD" and t.text in STATEMENT_START:
                return
            self.advance()

    # -- program ------------------------------------------------------------------------
    def program(self) -> N.Program:
        structures = []
        while self.tok.kind != "EOF":
            if self.at(";"):
                self.advance()
                continue
            try:
                if not self.at("structure"):
                    raise ParseError(f"expected 'structure', found {self._describe(self.tok)}", self.tok.span)
                structures.append(self.structure())
            except ParseError as e:
                self.error(e)
                self.sync()
                if self.at("}"):
                    self.advance()
        end = self.tok.span
        return N.Program(structures, Span(1, 1, end.end_line, end.end_col))

    def structure(self) -> N.StructureDecl:
        start = self.expect("structure")
        name = self.expect_ident("a structure name")
        self.expect(":", "':' and a structure type")
        typ = self.expect_ident("a structure type")
        orientation = None
        if self.tok.kind == "IDENT":
            orientation = self.advance().text
        at = None
        if self.at("at"):
            self.advance()
            at = self.primary()
            if not isinstance(at, N.Tuple) or len(at.items) != 2:
                raise ParseError("expected '(tx, ty)' after 'at'", at.span)
        open_tok = self.expect("{", "'{'")
        node = N.StructureDecl(name.text, typ.text, orientation, at, [], None, open_tok.span, typ.span)
        while True:
            if self.at("}"):
                close = self.advance()
                node.span = start.span.merge(close.span)
                return node
            if self.tok.kind == "EOF":
                raise ParseError(f"end of file inside structure {name.text!r}: missing '}}'",
                                 self.tok.span,
                                 notes=[(f"structure {name.text!r} opened here", open_tok.span)])
            if self.at(";"):
                self.advance()
                continue
            try:
                node.body.append(self.statement())
            except ParseError as e:
                if self.tok.kind == "EOF":
                    raise ParseError(e.message, e.span,
                                     notes=e.notes + [(f"structure {name.text!r} opened here", open_tok.span)])
                self.error(e)
                self.sync()

    def statement(self):
        t = self.tok
        if t.kind == "KEYWORD":
            if t.text == "structure":
                return self.structure()
            if t.text in ("param", "const"):
                return self.param_decl()
            if t.text == "constrain":
                return self.constrain()
            if t.text in ("point", "line", "arc", "circle", "rect", "rectangle", "triangle"):
                return self.geom_decl()
        raise ParseError(f"expected a declaration or 'constrain', found {self._describe(t)}", t.span)

    def param_decl(self):
        kw = self.advance()
        name = self.expect_ident("a parameter name")
        self.expect("=")
        value = self.expr()
        return N.ParamDecl(name.text, value, kw.text == "param", kw.span.merge(value.span))

    def geom_decl(self):
        kw = self.advance()
        name = self.expect_ident(f"a {kw.text} name")
        self.expect("=")
        ctor_tok = self.expect_ident("a constructor name")
        call = self.call_tail(ctor_tok)
        return N.GeomDecl(kw.text, name.text, call, kw.span.merge(call.span))

    def constrain(self):
        kw = self.advance()
        clauses = [self.clause()]
        while self.at("and"):
            self.advance()
            clauses.append(self.clause())
        return N.Constrain(clauses, kw.span.merge(clauses[-1].span))

    def clause(self):
        lhs = self.expr()
        if self.tok.kind == "OP" and self.tok.text in RELATIONS:
            rel = self.advance().text
            rhs = self.expr()
            return N.Relation(lhs, rel, rhs, lhs.span.merge(rhs.span))
        if self.tok.kind == "OP" and self.tok.text in ("=", "<", ">"):
            raise ParseError(f"unsupported relation {self.tok.text!r}; use ==, <= or >=", self.tok.span)
        if isinstance(lhs, N.Call) and lhs.func not in MATH_FUNCS:
            return lhs
        raise ParseError("expected a constraint call or a relation (==, <=, >=)", lhs.span)

    # -- expressions ------------------------------------------------------------------
    def expr(self):
        left = self.term()
        while self.tok.kind == "OP" and self.tok.text in ("+", "-"):
            op = self.advance().text
            right = self.term()
            left = N.BinOp(op, left, right, left.span.merge(right.span))
        return left

    def term(self):
        left = self.unary()
        while self.tok.kind == "OP" and self.tok.text in ("*", "/"):
            op = self.advance().text
            right = self.unary()
            left = N.BinOp(op, left, right, left.span.merge(right.span))
        return left

    def unary(self):
        if self.at("-"):
            t = self.advance()
            inner = self.unary()
            if isinstance(inner, N.Num):
                return N.Num(-inner.value, t.span.merge(inner.span), "-" + inner.text)
            return N.Unary("-", inner, t.span.merge(inner.span))
        if self.at("+"):
            self.advance()
            return self.unary()
        return self.primary()

    def primary(self):
        t = self.tok
        if t.kind == "NUMBER":
            self.advance()
            return N.Num(t.value, t.span, t.text)
        if t.kind == "IDENT":
            self.advance()
            if self.at("("):
                return self.call_tail(t)
            parts, span = [t.text], t.span
            while self.at("."):
                self.advance()
                nt = self.expect_ident("a name after '.'")
                parts.append(nt.text)
                span = span.merge(nt.span)
            return N.PathRef(parts, span)
        if self.at("("):
            open_t = self.advance()
            first = self.expr()
            if self.at(","):
                items = [first]
                while self.at(","):
                    self.advance()
                    items.append(self.expr())
                close = self.expect(")", "')'")
                return N.Tuple(items, open_t.span.merge(close.span))
            self.expect(")", "')'")
            return first
        raise ParseError(f"expected an expression, found {self._describe(t)}", t.span)

    def call_tail(self, name_tok: Token) -> N.Call:
        self.expect("(", "'('")
        args = []
        while not self.at(")"):
            if self.tok.kind == "IDENT" and self.peek().kind == "OP" and self.peek().text == "=":
                n = self.advance()
                self.advance()
                v = self.expr()
                args.append(N.Arg(n.text, v, n.span.merge(v.span)))
            else:
                v = self.expr()
                args.append(N.Arg(None, v, v.span))
            if not self.at(","):
                break
            self.advance()
        close = self.expect(")", "')' or ','")
        return N.Call(name_tok.text, args, name_tok.span.merge(close.span), name_tok.span)


def parse(src: SourceUnit) -> tuple[Optional[N.Program], list[Diagnostic]]:
    """AST and syntax diagnostics.  The AST is None when any error occurred."""
    try:
        p = Parser(src)
    except LexError as e:
        return None, [Diagnostic(Code.SYNTAX, e.message, span=e.span, file=src.path)]
    try:
        prog = p.program()
    except ParseError as e:
        p.error(e)
        prog = None
    except LexError as e:  # pragma: no cover
        p.diags.append(Diagnostic(Code.SYNTAX, e.message, span=e.span, file=src.path))
        prog = None
    if not prog or not prog.structures:
        if not any(d.is_error for d in p.diags):
            p.diags.append(Diagnostic(Code.SYNTAX, "program declares no structure", span=src.end_span(),
                                      file=src.path))
    if any(d.is_error for d in p.diags):
        return None, p.diags
    if len(prog.structures) > 1:
        extra = prog.structures[1]
        return None, [Diagnostic(Code.SYNTAX, "a program has exactly one top-level structure; nest the others",
                                 span=extra.span, file=src.path)]
    return prog, p.diags


def parse_text(text: str, path: str = "<string>"):
    return parse(SourceUnit(path, text))
