"""Syntax tree for .aidl programs.  Every node carries its source span."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..diagnostics import Span


# expressions

@dataclass
class Num:
    value: float
    span: Span
    text: str = ""


@dataclass
class PathRef:
    parts: list
    span: Span

    @property
    def dotted(self) -> str:
        return ".".join(self.parts)


@dataclass
class Call:
    func: str
    args: list          # list[Arg]
    span: Span
    func_span: Optional[Span] = None


@dataclass
class Arg:
    name: Optional[str]
    value: object
    span: Span


@dataclass
class Unary:
    op: str
    operand: object
    span: Span


@dataclass
class BinOp:
    op: str
    left: object
    right: object
    span: Span


@dataclass
class Tuple:
    items: list
    span: Span


# statements

@dataclass
class ParamDecl:
    name: str
    value: object
    mutable: bool
    span: Span


@dataclass
class GeomDecl:
    keyword: str
    name: str
    ctor: Call
    span: Span


@dataclass
class Relation:
    lhs: object
    rel: str
    rhs: object
    span: Span


@dataclass
class Constrain:
    clauses: list        # Call (named constraint) or Relation
    span: Span


@dataclass
class StructureDecl:
    name: str
    type: str
    orientation: Optional[str]
    at: Optional[Tuple]
    body: list = field(default_factory=list)
    span: Optional[Span] = None
    open_span: Optional[Span] = None
    type_span: Optional[Span] = None


@dataclass
class Program:
    structures: list
    span: Span


def ast_record(node):
    """Plain JSON-able dump of a syntax tree, tagged with node class names."""
    if isinstance(node, list):
        return [ast_record(n) for n in node]
    if isinstance(node, Span):
        return [node.line, node.col, node.end_line, node.end_col]
    if hasattr(node, "__dataclass_fields__"):
        rec = {"node": type(node).__name__}
        for name in node.__dataclass_fields__:
            rec[name] = ast_record(getattr(node, name))
        return rec
    return node
