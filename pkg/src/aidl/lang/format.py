"""Canonical pretty-printer for model trees.

The output re-parses to an isomorphic model: same tree, names, declaration
order, initial values (printed as shortest round-trip decimals) and
constraints under their canonical names.  Constraints a constructor creates
implicitly are not printed; the constructor recreates them.
"""

from __future__ import annotations

from ..expr import Binary, Const, Expr, ParamRef, Parameter, Unary, format_number, to_sexpr
from ..model import (
    Arc,
    BBoxRef,
    Circle,
    Compound,
    Geometry,
    Line,
    Point,
    RECT_CORNERS,
    Structure,
    TRI_CORNERS,
    path_of,
)

INDENT = "    "
_INFIX = {"add": ("+", 1), "sub": ("-", 1), "mul": ("*", 2), "div": ("/", 2)}


def _rel(entity, owner: Structure) -> str:
    if entity is owner:
        return owner.name
    try:
        p = path_of(entity, owner)
    except Exception:
        p = path_of(entity)
    return p or owner.name


def _origin_path(entity, attr: str, owner: Structure) -> str:
    if entity is owner:
        if attr in owner.namespace:
            return attr
        return f"{owner.name}.{attr}"
    return f"{_rel(entity, owner)}.{attr}"


def format_expr(e: Expr, owner: Structure, prec: int = 0) -> str:
    if e.origin is not None:
        return _origin_path(e.origin[0], e.origin[1], owner)
    t = type(e)
    if t is Const:
        s = format_number(e.value)
        return f"({s})" if e.value < 0 and prec > 1 else s
    if t is ParamRef:
        p = e.param
        if p.home is not None:
            return _origin_path(p.home[0], p.home[1], owner)
        return p.name
    if isinstance(e, BBoxRef):
        return _origin_path(e.structure, f"bb.{e.side}", owner)
    if t is Unary:
        if e.op == "neg":
            s = "-" + format_expr(e.arg, owner, 3)
            return f"({s})" if prec > 1 else s
        return f"{e.op}({format_expr(e.arg, owner)})"
    if t is Binary:
        if e.op in ("min", "max"):
            return f"{e.op}({format_expr(e.left, owner)}, {format_expr(e.right, owner)})"
        sym, p = _INFIX[e.op]
        s = f"{format_expr(e.left, owner, p)} {sym} {format_expr(e.right, owner, p + 1)}"
        return f"({s})" if p < prec else s
    raise TypeError(f"cannot format {e!r}")  # pragma: no cover


def _arg(a, owner):
    if isinstance(a, (Structure, Geometry)):
        return _rel(a, owner)
    if isinstance(a, Parameter):
        return _origin_path(a.home[0], a.home[1], owner)
    if isinstance(a, Expr):
        return format_expr(a, owner)
    return format_number(a)


def _xy(p: Point) -> str:
    return f"({format_number(p.x.value)}, {format_number(p.y.value)})"


def _pt(p: Point, owner_name: str, role: str) -> str:
    """Coordinates for a point the constructor made, the point's name when shared."""
    if p.name == f"{owner_name}.{role}":
        return _xy(p)
    return p.name


def _decl(d, s: Structure, depth: int) -> list[str]:
    pad = INDENT * depth
    if isinstance(d, Structure):
        return format_structure(d, depth)
    if isinstance(d, Parameter):
        kw = "param" if d.mutable else "const"
        return [f"{pad}{kw} {d.home[1]} = {format_number(d.value)}"]
    if isinstance(d, Point):
        return [f"{pad}point {d.name} = Point({format_number(d.x.value)}, {format_number(d.y.value)})"]
    if isinstance(d, Line):
        return [f"{pad}line {d.name} = Line({_pt(d.start, d.name, 'start')}, {_pt(d.end, d.name, 'end')})"]
    if isinstance(d, Arc):
        parts = ", ".join(f"{k}={_pt(getattr(d, k), d.name, k)}" for k in ("center", "start", "end"))
        return [f"{pad}arc {d.name} = Arc({parts})"]
    if isinstance(d, Circle):
        return [f"{pad}circle {d.name} = Circle({_pt(d.center, d.name, 'center')}, "
                f"{format_number(d.radius.value)})"]
    if isinstance(d, Compound):
        keys = RECT_CORNERS if d.ctor == "Rectangle" else TRI_CORNERS
        parts = [f"{k}={_pt(d.members[k], d.name, k)}" for k in keys]
        if d.ctor == "Rectangle":
            if d.rotatable:
                parts.append("rotatable=true")
            return [f"{pad}rect {d.name} = Rectangle({', '.join(parts)})"]
        return [f"{pad}triangle {d.name} = Triangle({', '.join(parts)})"]
    raise TypeError(f"cannot format declaration {d!r}")  # pragma: no cover


def format_constraint(spec, owner: Structure) -> str:
    if spec.name == "Equation":
        lhs, rel, rhs = spec.args
        return f"constrain {format_expr(lhs, owner)} {rel} {format_expr(rhs, owner)}"
    return f"constrain {spec.name}({', '.join(_arg(a, owner) for a in spec.args)})"


def format_structure(s: Structure, depth: int = 0) -> list[str]:
    pad = INDENT * depth
    head = f"{pad}structure {s.name} : {s.type}"
    if s.orientation != "Top":
        head += f" {s.orientation}"
    if s.parent is not None and (s.tx.value != 0.0 or s.ty.value != 0.0):
        head += f" at ({format_number(s.tx.value)}, {format_number(s.ty.value)})"
    body = []
    for d in s.decls:
        body += _decl(d, s, depth + 1)
    for spec in s.constraints:
        if not spec.implicit:
            body.append(INDENT * (depth + 1) + format_constraint(spec, s))
    if not body:
        return [head + " { }"]
    return [head + " {"] + body + [pad + "}"]


def format_model(root: Structure) -> str:
    """Canonical source text for ``root``."""
    return "\n".join(format_structure(root)) + "\n"


def model_signature(root: Structure):
    """Order-sensitive structural fingerprint used to compare models: tree
    shape, declarations with initial values, and each constraint as its
    canonical name plus argument descriptions (expressions as s-expressions
    over absolute parameter names)."""

    def arg(a):
        if isinstance(a, Structure):
            return ("structure", a.path)
        if isinstance(a, Geometry):
            return (a.kind, path_of(a))
        if isinstance(a, Expr):
            return ("expr", to_sexpr(a))
        return ("value", a)

    def decl(d):
        if isinstance(d, Structure):
            return ("structure", d.name)
        if isinstance(d, Parameter):
            return ("param", d.name, d.value, d.mutable)
        if isinstance(d, Compound):
            pts = tuple((k, m.name, m.xy()) for k, m in d.members.items() if isinstance(m, Point))
            return (d.ctor, d.name, d.rotatable, pts)
        pts = tuple((p.name, p.xy()) for p in d.defining_points())
        extra = (d.radius.value,) if isinstance(d, Circle) else ()
        return (d.kind, d.name, pts) + extra

    def node(s):
        cons = tuple((c.name, c.implicit, tuple(arg(a) for a in c.args)) for c in s.constraints)
        return (s.name, s.type, s.orientation, s.tx.value, s.ty.value,
                tuple(decl(d) for d in s.decls), cons, tuple(node(c) for c in s.children))

    return node(root)
