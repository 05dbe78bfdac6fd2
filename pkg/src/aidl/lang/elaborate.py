"""Elaboration: syntax tree to model tree, with diagnostics.

Declarations are built in a first pass (in source order, so constructor
arguments may use earlier parameters and points); constraints are attached in
a second pass, so they may refer to anything declared anywhere in the
program.  Paths resolve lexically: the first segment is looked up in the
constraint's structure, then in each enclosing structure (a structure's own
name also resolves to it); later segments are attributes.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass, field
from typing import Optional

from ..constraints import finalize_deferred
from ..diagnostics import AidlError, Code, Diagnostic
from ..expr import DomainError, Expr, Parameter, as_expr, binary, evaluate, unary
from ..model import (
    BBoxRef,
    ConstructorError,
    Geometry,
    NameResolution,
    Point,
    Structure,
    validate,
)
from . import nodes as N
from .lexer import SourceUnit
from .parser import MATH_FUNCS, parse

_UNARY_FUNCS = {"sin": "sin", "cos": "cos", "arcsin": "arcsin", "asin": "arcsin", "arccos": "arccos",
                "acos": "arccos", "sqrt": "sqrt", "abs": "abs", "norm": "norm", "square": "square"}
_BINOPS = {"+": "add", "-": "sub", "*": "mul", "/": "div"}

# keyword -> constructor; constructor -> (parameters, positional allowed)
KEYWORD_CTOR = {"point": "Point", "line": "Line", "arc": "Arc", "circle": "Circle",
                "rect": "Rectangle", "rectangle": "Rectangle", "triangle": "Triangle"}
CTORS = {
    "Point": (("x", "y"), True),
    "Line": (("start", "end"), True),
    "Arc": (("center", "start", "end"), False),
    "Circle": (("center", "radius"), True),
    "Rectangle": (("center", "origin", "width", "height", "bottom_left", "bottom_right", "top_right",
                   "top_left", "rotatable"), False),
    "Triangle": (("pt_a", "pt_b", "pt_c", "center", "base", "height"), False),
}


class ArityOrType(AidlError):
    code = Code.ARITY_OR_TYPE


class _Elaborator:
    def __init__(self, file: str = ""):
        self.file = file
        self.diags: list[Diagnostic] = []
        self.pending: list[tuple[Structure, N.Constrain]] = []

    def report(self, err: AidlError, span, path=""):
        d = err.to_diagnostic(span, self.file)
        d.path = d.path or path
        self.diags.append(d)

    # -- pass 1 -------------------------------------------------------------------------
    def structure(self, decl: N.StructureDecl, parent: Optional[Structure]) -> Optional[Structure]:
        try:
            tx = ty = 0.0
            if decl.at is not None:
                scope = parent if parent is not None else Structure("root")
                tx, ty = (self.number(item, scope) for item in decl.at.items)
            s = Structure(decl.name, decl.type, decl.orientation or "Top", tx, ty)
            if parent is not None:
                parent.add_structure(s)
        except AidlError as e:
            span = decl.type_span if isinstance(e, ConstructorError) else decl.span
            self.report(e, span, parent.path if parent else "")
            return None
        s.span = decl.span
        for stmt in decl.body:
            try:
                if isinstance(stmt, N.StructureDecl):
                    self.structure(stmt, s)
                elif isinstance(stmt, N.ParamDecl):
                    s.add_parameter(stmt.name, self.number(stmt.value, s), stmt.mutable)
                elif isinstance(stmt, N.GeomDecl):
                    self.geometry(stmt, s)
                elif isinstance(stmt, N.Constrain):
                    self.pending.append((s, stmt))
            except AidlError as e:
                self.report(e, stmt.span, s.path)
            except DomainError as e:
                self.report(ConstructorError(str(e)), stmt.span, s.path)
        return s

    def geometry(self, stmt: N.GeomDecl, s: Structure):
        call = stmt.ctor
        want = KEYWORD_CTOR[stmt.keyword]
        if call.func != want:
            raise ConstructorError(f"'{stmt.keyword}' declarations use {want}(...), not {call.func}(...)")
        params, positional = CTORS[want]
        args: dict[str, object] = {}
        for k, a in enumerate(call.args):
            if a.name is None:
                if not positional:
                    raise ConstructorError(f"{want} takes named arguments ({', '.join(params)})")
                if k >= len(params):
                    raise ConstructorError(f"{want} takes at most {len(params)} arguments")
                key = params[k]
            else:
                key = a.name
                if key not in params:
                    raise ConstructorError(f"{want} has no argument {key!r}; expected {', '.join(params)}")
            if key in args:
                raise ConstructorError(f"{want}: argument {key!r} given twice")
            args[key] = a.value
        name = stmt.name
        if want == "Point":
            need(args, ("x", "y"), want)
            s.add_point(name, self.number(args["x"], s), self.number(args["y"], s))
        elif want == "Line":
            need(args, ("start", "end"), want)
            s.add_line(name, self.point(args["start"], s), self.point(args["end"], s))
        elif want == "Arc":
            need(args, ("center", "start", "end"), want)
            s.add_arc(name, *(self.point(args[k], s) for k in ("center", "start", "end")))
        elif want == "Circle":
            need(args, ("center", "radius"), want)
            s.add_circle(name, self.point(args["center"], s), self.number(args["radius"], s))
        elif want == "Rectangle":
            rot = self.flag(args.pop("rotatable", None), s)
            corners = [k for k in ("bottom_left", "bottom_right", "top_right", "top_left") if k in args]
            if corners:
                if len(args) != 4 or len(corners) != 4:
                    raise ConstructorError("Rectangle corners form needs exactly bottom_left, bottom_right, "
                                           "top_right and top_left")
                s.add_rectangle(name, corners={k: self.point(args[k], s) for k in corners}, rotatable=rot)
            else:
                kw = {k: self.coords(args[k], s) if k in ("center", "origin") else self.number(args[k], s)
                      for k in args}
                s.add_rectangle(name, rotatable=rot, **kw)
        elif want == "Triangle":
            kw = {k: self.coords(v, s) if k == "center" else
                  (self.point(v, s) if k.startswith("pt_") else self.number(v, s)) for k, v in args.items()}
            s.add_triangle(name, **kw)

    def flag(self, node, s) -> bool:
        if node is None:
            return False
        if isinstance(node, N.PathRef) and node.parts in (["true"], ["false"]):
            return node.parts == ["true"]
        raise ConstructorError("rotatable must be true or false")

    def coords(self, node, s) -> tuple:
        if isinstance(node, N.Tuple) and len(node.items) == 2:
            return (self.number(node.items[0], s), self.number(node.items[1], s))
        if isinstance(node, N.PathRef):
            ent = self.resolve(node, s)
            if isinstance(ent, Point):
                return ent.xy()
        raise ConstructorError("expected an (x, y) pair")

    def point(self, node, s):
        if isinstance(node, N.PathRef):
            ent = self.resolve(node, s)
            if isinstance(ent, Point):
                return ent
            raise ConstructorError(f"{node.dotted} is not a point")
        return self.coords(node, s)

    def number(self, node, s) -> float:
        e = self.expr(node, s)
        try:
            return evaluate(e)
        except TypeError:
            raise ConstructorError("bounding boxes have no value before solving") from None

    # -- resolution ----------------------------------------------------------------------
    def resolve(self, ref: N.PathRef, owner: Structure):
        first = ref.parts[0]
        ent, s = None, owner
        while s is not None:
            if first in s.namespace:
                ent = s.attribute(first, frame=owner)
                break
            if first == s.name:
                ent = s
                break
            s = s.parent
        if ent is None:
            names = {n for sc in _scopes(owner) for n in sc.namespace} | {sc.name for sc in _scopes(owner)}
            close = difflib.get_close_matches(first, sorted(names), n=1)
            raise NameResolution(f"unknown name {first!r} in {owner.path}", path=owner.path,
                                 suggestion=close[0] if close else None)
        for part in ref.parts[1:]:
            if not hasattr(ent, "attribute"):
                raise NameResolution(f"{'.'.join(ref.parts[:ref.parts.index(part)])} has no member {part!r}",
                                     path=owner.path)
            ent = ent.attribute(part, frame=owner)
        return ent

    def expr(self, node, owner: Structure) -> Expr:
        if isinstance(node, N.Num):
            return as_expr(node.value)
        if isinstance(node, N.PathRef):
            ent = self.resolve(node, owner)
            if isinstance(ent, (Expr, Parameter)):
                return as_expr(ent)
            kind = ent.kind if isinstance(ent, Geometry) else "structure"
            raise ArityOrType(f"{node.dotted} is a {kind}, not a number", path=owner.path)
        if isinstance(node, N.Unary):
            return unary("neg", self.expr(node.operand, owner))
        if isinstance(node, N.BinOp):
            return binary(_BINOPS[node.op], self.expr(node.left, owner), self.expr(node.right, owner))
        if isinstance(node, N.Call):
            if node.func not in MATH_FUNCS:
                raise NameResolution(f"unknown function {node.func!r}", path=owner.path)
            if any(a.name for a in node.args):
                raise ArityOrType(f"{node.func} takes positional arguments", path=owner.path)
            vals = [self.expr(a.value, owner) for a in node.args]
            if node.func in ("min", "max"):
                if len(vals) < 2:
                    raise ArityOrType(f"{node.func} needs at least two arguments", path=owner.path)
                out = vals[0]
                for v in vals[1:]:
                    out = binary(node.func, out, v)
                return out
            if len(vals) != 1:
                raise ArityOrType(f"{node.func} takes one argument", path=owner.path)
            return unary(_UNARY_FUNCS[node.func], vals[0])
        if isinstance(node, N.Tuple):
            raise ArityOrType("a coordinate pair is not a number", path=owner.path)
        raise ArityOrType(f"unexpected expression {node!r}")  # pragma: no cover

    def arg(self, node, owner):
        if isinstance(node, N.PathRef):
            ent = self.resolve(node, owner)
            return as_expr(ent) if isinstance(ent, Parameter) else ent
        return self.expr(node, owner)

    # -- pass 2 ----------------------------------------------------------------------------
    def constraints(self):
        for owner, stmt in self.pending:
            for clause in stmt.clauses:
                try:
                    if isinstance(clause, N.Relation):
                        owner.add_equation(self.expr(clause.lhs, owner), clause.rel,
                                           self.expr(clause.rhs, owner), span=clause.span)
                    else:
                        if any(a.name for a in clause.args):
                            raise ArityOrType(f"{clause.func} takes positional arguments", path=owner.path)
                        from ..constraints import resolve_synonym

                        resolve_synonym(clause.func)  # unknown names fail before argument errors
                        args = [self.arg(a.value, owner) for a in clause.args]
                        owner.add_constraint(clause.func, *args, span=clause.span)
                except AidlError as e:
                    self.report(e, clause.span, owner.path)


def need(args, keys, ctor):
    missing = [k for k in keys if k not in args]
    if missing:
        raise ConstructorError(f"{ctor} is missing {', '.join(missing)}")


def _scopes(s):
    while s is not None:
        yield s
        s = s.parent


def elaborate(prog: N.Program, file: str = "") -> tuple[Optional[Structure], list[Diagnostic]]:
    """Model tree plus diagnostics; the tree is None when any error was found."""
    el = _Elaborator(file)
    root = el.structure(prog.structures[0], None)
    if root is not None:
        el.constraints()
        if not any(d.is_error for d in el.diags):
            for d in validate(root):
                d.file = file
                el.diags.append(d)
    if any(d.is_error for d in el.diags):
        return None, el.diags
    return root, el.diags


@dataclass
class Compiled:
    root: Optional[Structure]
    diagnostics: list = field(default_factory=list)
    source: Optional[SourceUnit] = None

    @property
    def ok(self) -> bool:
        return self.root is not None and not any(d.is_error for d in self.diagnostics)


def compile_source(text: str, path: str = "<string>", finalize: bool = True) -> Compiled:
    """Parse, elaborate, validate and (optionally) finalize deferred constraints."""
    src = SourceUnit(path, text)
    prog, diags = parse(src)
    if prog is None:
        return Compiled(None, diags, src)
    root, more = elaborate(prog, path)
    diags += more
    if root is None:
        return Compiled(None, diags, src)
    if finalize:
        fin = finalize_deferred(root)
        for d in fin:
            d.file = path
        diags += fin
        if any(d.is_error for d in fin):
            return Compiled(None, diags, src)
    return Compiled(root, diags, src)


def compile_file(path: str, finalize: bool = True) -> Compiled:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return compile_source(text, path, finalize)
