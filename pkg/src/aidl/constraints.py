"""Constraint vocabulary and lowering to residual equalities.

A :class:`ConstraintSpec` is what a program states (``Above(a, b)``); a
:class:`LoweredConstraint` is what the solver sees: a list of equality
residuals, with every inequality rewritten through a slack variable.  Most
lowering happens at finalization time because bounding boxes and
convention-dependent constraints (Angle, circle Tangent) are only well
defined once the tree and its initial values are fixed.
"""

from __future__ import annotations

import difflib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from .diagnostics import AidlError, Code, Diagnostic
from .expr import (
    Const,
    DomainError,
    Expr,
    Parameter,
    ParamRef,
    Residual,
    abs_,
    as_expr,
    cos,
    evaluate,
    iter_nodes,
    parameters,
    sin,
    sqrt,
    square,
    substitute,
)
from .model import (
    Arc,
    BBoxRef,
    Circle,
    Compound,
    Geometry,
    Line,
    Point,
    Structure,
    bounding_box,
    coord,
    entity_structure,
)


class NotFound(AidlError):
    code = Code.UNKNOWN_CONSTRAINT

    def __init__(self, surface_name: str, suggestion: Optional[str]):
        msg = f"unknown constraint {surface_name!r}"
        super().__init__(msg, suggestion=suggestion)
        self.surface_name = surface_name


class DeferredUnresolvable(AidlError):
    code = Code.DEFERRED_UNRESOLVABLE


class LoweringError(AidlError):
    code = Code.ARITY_OR_TYPE


# --- registry -------------------------------------------------------------------------

@dataclass(frozen=True)
class Signature:
    args: tuple
    lowering: str
    swap: bool = False


@dataclass(frozen=True)
class RegistryEntry:
    canonical: str
    kind: str
    signatures: tuple


def _norm(name: str) -> str:
    return name.replace("_", "").lower()


def load_registry(text: Optional[str] = None):
    if text is None:
        text = resources.files(__package__).joinpath("registry.json").read_text(encoding="utf-8")
    data = json.loads(text)
    entries, surface = {}, {}
    for c in data["constraints"]:
        sigs = tuple(Signature(tuple(s["args"]), s["lowering"], s.get("swap", False)) for s in c["signatures"])
        entries[c["canonical"]] = RegistryEntry(c["canonical"], c["kind"], sigs)
        surface[_norm(c["canonical"])] = (c["canonical"], c["canonical"])
    for s in data["synonyms"]:
        if s["canonical"] not in entries:
            raise ValueError(f"synonym {s['name']!r} points at unknown constraint {s['canonical']!r}")
        surface[_norm(s["name"])] = (s["name"], s["canonical"])
    return data["version"], entries, surface


REGISTRY_VERSION, REGISTRY, _SURFACE = load_registry()


def surface_names() -> list[str]:
    return [v[0] for v in _SURFACE.values()]


def suggest(surface_name: str) -> Optional[str]:
    """Canonical name of the closest registered surface name."""
    hit = difflib.get_close_matches(_norm(surface_name), sorted(_SURFACE), n=1, cutoff=0.0)
    return _SURFACE[hit[0]][1] if hit else None


def resolve_synonym(surface_name: str) -> str:
    """Canonical constraint for a surface name (case and underscores ignored)."""
    hit = _SURFACE.get(_norm(surface_name))
    if hit is None:
        raise NotFound(surface_name, suggest(surface_name))
    return hit[1]


# --- specs ---------------------------------------------------------------------------

@dataclass(eq=False)
class ConstraintSpec:
    name: str                 # canonical, or "Equation" for raw relations
    surface: str              # as written (relation symbol for equations)
    args: list
    owner: Structure
    span: object = None
    implicit: bool = False    # created by a constructor, not written by the user


@dataclass(eq=False)
class Inequality:
    lhs: Expr
    rhs: Expr
    slack: Parameter

    def gap(self) -> float:
        """``rhs - lhs``; non-negative when the inequality holds."""
        return evaluate(self.rhs) - evaluate(self.lhs)


@dataclass(eq=False)
class LoweredConstraint:
    spec: Optional[ConstraintSpec]
    residuals: list = field(default_factory=list)     # list[Residual]
    slacks: list = field(default_factory=list)        # list[Parameter]
    inequalities: list = field(default_factory=list)  # list[Inequality]
    deferred: bool = False
    choice: Optional[str] = None
    label: str = ""

    def extend(self, other: "LoweredConstraint"):
        self.residuals += other.residuals
        self.slacks += other.slacks
        self.inequalities += other.inequalities


_KINDS = {
    "point": {"point"}, "line": {"line"}, "arc": {"arc"}, "circle": {"circle"},
    "round": {"arc", "circle"}, "curve": {"line", "arc", "circle"},
    "geometry": {"point", "line", "arc", "circle", "compound"},
    "structure": {"structure"}, "expr": {"expr"},
}


def arg_kind(a) -> str:
    if isinstance(a, Structure):
        return "structure"
    if isinstance(a, Geometry):
        return a.kind
    if isinstance(a, (Expr, Parameter)) or (isinstance(a, (int, float)) and not isinstance(a, bool)):
        return "expr"
    return type(a).__name__


def check_signature(spec: ConstraintSpec) -> Optional[Signature]:
    """First registered signature matching the constraint's argument kinds."""
    if spec.name == "Equation":
        ok = (len(spec.args) == 3 and spec.args[1] in ("==", "<=", ">=")
              and arg_kind(spec.args[0]) == "expr" and arg_kind(spec.args[2]) == "expr")
        return Signature(("expr", "relation", "expr"), "equation") if ok else None
    entry = REGISTRY.get(spec.name)
    if entry is None:
        return None
    kinds = [arg_kind(a) for a in spec.args]
    for sig in entry.signatures:
        if len(sig.args) == len(kinds) and all(k in _KINDS[w] for k, w in zip(kinds, sig.args)):
            return sig
    return None


def referenced_entities(spec: ConstraintSpec) -> list:
    """Structures, geometry and parameters a spec touches, including those
    reached through expression arguments."""
    out = []
    for a in spec.args:
        if isinstance(a, (Structure, Geometry)):
            out.append(a)
            if isinstance(a, Geometry):
                out.extend(p for p in a.defining_points() if p is not a)
        elif isinstance(a, Parameter):
            out.append(a)
        elif isinstance(a, Expr):
            for node in iter_nodes(a):
                if isinstance(node, BBoxRef):
                    out.append(node.structure)
                elif type(node) is ParamRef:
                    out.append(node.param)
    return out


# --- lowering helpers -------------------------------------------------------------------

class _Frame:
    """Coordinate access in the constraint owner's frame."""

    def __init__(self, owner: Structure):
        self.owner = owner

    def x(self, p: Point) -> Expr:
        return coord(p, "x", self.owner)

    def y(self, p: Point) -> Expr:
        return coord(p, "y", self.owner)

    def xy(self, p):
        return self.x(p), self.y(p)

    def direction(self, line: Line):
        return self.x(line.end) - self.x(line.start), self.y(line.end) - self.y(line.start)

    def radius(self, g) -> Expr:
        if isinstance(g, Circle):
            return g.radius.ref()
        return sqrt(g.radius_squared())

    def radius_sq(self, g) -> Expr:
        if isinstance(g, Circle):
            return square(g.radius.ref())
        return g.radius_squared()


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def _dot(ax, ay, bx, by):
    return ax * bx + ay * by


def _wrap(a: float) -> float:
    """Angle wrapped into (-pi, pi]."""
    a = math.fmod(a, 2 * math.pi)
    if a <= -math.pi:
        a += 2 * math.pi
    elif a > math.pi:
        a -= 2 * math.pi
    return a


def _slack_name(owner: Structure) -> str:
    return f"$s{len(owner.slacks)}"


def rewrite_inequality(lhs, rhs, owner: Structure, relation: str = "<=") -> LoweredConstraint:
    """``lhs <= rhs`` as ``lhs - rhs + s == 0`` and ``s - |s| == 0``.

    ``>=`` swaps the operands.  The slack starts at the feasibility gap
    ``max(0, rhs - lhs)`` so an inequality that already holds starts with
    zero residuals; it is registered on ``owner``.
    """
    lhs, rhs = as_expr(lhs), as_expr(rhs)
    if relation == ">=":
        lhs, rhs = rhs, lhs
    elif relation != "<=":
        raise ValueError(f"not an inequality: {relation!r}")
    gap = evaluate(rhs) - evaluate(lhs)
    local = _slack_name(owner)
    s = Parameter(f"{owner.path}.{local}", max(0.0, gap), role="slack")
    s.owner = owner
    s.home = (owner, local)
    owner.slacks.append(s)
    sr = s.ref()
    return LoweredConstraint(
        None,
        residuals=[Residual(lhs - rhs + sr, "inequality"), Residual(sr - abs_(sr), "slack")],
        slacks=[s],
        inequalities=[Inequality(lhs, rhs, s)],
    )


def add_noninversion(bbox, owner: Structure) -> list[LoweredConstraint]:
    """``width >= 0`` and ``height >= 0`` for a (real or virtual) box."""
    out = []
    for label, extent in (("width", bbox.width), ("height", bbox.height)):
        lc = rewrite_inequality(Const(0.0), extent, owner)
        lc.label = f"noninversion.{label}"
        out.append(lc)
    return out


def _cooccurring(spec: ConstraintSpec) -> list[Structure]:
    out = []
    for a in spec.args:
        if isinstance(a, Structure):
            out.append(a)
        elif isinstance(a, Expr):
            out += [n.structure for n in iter_nodes(a) if isinstance(n, BBoxRef)]
    uniq = []
    for s in out:
        if not any(s is u for u in uniq):
            uniq.append(s)
    return uniq


def _bbox_for(structure: Structure, spec: ConstraintSpec, co: list[Structure]):
    excl = [d for d in co if d is not structure and d.is_descendant_of(structure)]
    return bounding_box(structure, exclusion=excl, frame=spec.owner)


def _resolve_expr(a, spec: ConstraintSpec, co) -> Expr:
    e = as_expr(a)
    cache = {}

    def fn(node):
        if isinstance(node, BBoxRef):
            key = id(node.structure)
            if key not in cache:
                cache[key] = _bbox_for(node.structure, spec, co)
            return cache[key].side(node.side)
        return None

    return substitute(e, fn)


# --- lowering table ----------------------------------------------------------------------

def _lower_geometric(lowering: str, args: list, f: _Frame, spec: ConstraintSpec) -> LoweredConstraint:
    lc = LoweredConstraint(spec)
    R = lc.residuals

    def eq(e, label=""):
        R.append(Residual(as_expr(e), label or lowering))

    if lowering == "coincident_points":
        a, b = args
        eq(f.x(a) - f.x(b)), eq(f.y(a) - f.y(b))
    elif lowering == "point_on_line":
        p, l = args
        dx, dy = f.direction(l)
        eq(_cross(dx, dy, f.x(p) - f.x(l.start), f.y(p) - f.y(l.start)))
    elif lowering == "point_on_round":
        p, c = args
        eq(square(f.x(p) - f.x(c.center)) + square(f.y(p) - f.y(c.center)) - f.radius_sq(c))
    elif lowering == "horizontal_line":
        eq(f.y(args[0].end) - f.y(args[0].start))
    elif lowering == "vertical_line":
        eq(f.x(args[0].end) - f.x(args[0].start))
    elif lowering == "horizontal_points":
        eq(f.y(args[0]) - f.y(args[1]))
    elif lowering == "vertical_points":
        eq(f.x(args[0]) - f.x(args[1]))
    elif lowering == "equal_length":
        eq(args[0].length() - args[1].length())
    elif lowering == "equal_radius":
        eq(f.radius(args[0]) - f.radius(args[1]))
    elif lowering == "tangent_rounds":
        a, b = args
        d2 = square(f.x(a.center) - f.x(b.center)) + square(f.y(a.center) - f.y(b.center))
        ra, rb = f.radius(a), f.radius(b)
        options = {"external": d2 - square(ra + rb), "internal": d2 - square(ra - rb)}
        lc.deferred = True
        lc.choice = min(options, key=lambda k: (abs(evaluate(options[k])), k != "external"))
        eq(options[lc.choice])
    elif lowering == "tangent_line_round":
        l, c = args
        dx, dy = f.direction(l)
        cr = _cross(dx, dy, f.x(c.center) - f.x(l.start), f.y(c.center) - f.y(l.start))
        eq(square(cr) - f.radius_sq(c) * (square(dx) + square(dy)))
    elif lowering == "perpendicular":
        eq(_dot(*f.direction(args[0]), *f.direction(args[1])))
    elif lowering == "parallel":
        eq(_cross(*f.direction(args[0]), *f.direction(args[1])))
    elif lowering in ("symmetric_points", "symmetric_lines", "symmetric_circles", "symmetric_arcs"):
        a, b, axis = args
        if lowering == "symmetric_points":
            pairs = [(a, b)]
        elif lowering == "symmetric_lines":
            pairs = [(a.start, b.start), (a.end, b.end)]
        elif lowering == "symmetric_circles":
            pairs = [(a.center, b.center)]
            eq(a.radius.ref() - b.radius.ref(), "symmetric_radius")
        else:
            # mirroring reverses the sweep, so start maps onto end
            pairs = [(a.center, b.center), (a.start, b.end), (a.end, b.start)]
        ax, ay = f.direction(axis)
        sx, sy = f.xy(axis.start)
        for p, q in pairs:
            px, py = f.xy(p)
            qx, qy = f.xy(q)
            eq(_dot(qx - px, qy - py, ax, ay), "symmetric_perpendicular")
            eq(_cross(ax, ay, 0.5 * (px + qx) - sx, 0.5 * (py + qy) - sy), "symmetric_midpoint")
    elif lowering == "fixed_geometry":
        g = args[0]
        for p in g.defining_points():
            x, y = f.xy(p)
            eq(x - evaluate(x), "fixed_x"), eq(y - evaluate(y), "fixed_y")
        if isinstance(g, Circle):
            eq(g.radius.ref() - g.radius.value, "fixed_radius")
    elif lowering == "fixed_expr":
        e = as_expr(args[0])
        eq(e - evaluate(e))
    elif lowering == "diameter":
        eq(2.0 * f.radius(args[0]) - as_expr(args[1]))
    elif lowering == "radius":
        eq(f.radius(args[0]) - as_expr(args[1]))
    elif lowering == "length":
        dx, dy = f.direction(args[0])
        eq(square(dx) + square(dy) - square(as_expr(args[1])))
    elif lowering == "distance":
        a, b, d = args
        eq(square(f.x(a) - f.x(b)) + square(f.y(a) - f.y(b)) - square(as_expr(d)))
    elif lowering == "angle":
        _lower_angle(args, f, lc)
    elif lowering == "equal_expr":
        eq(as_expr(args[0]) - as_expr(args[1]))
    else:  # pragma: no cover - registry/table mismatch
        raise LoweringError(f"no lowering named {lowering!r}")
    return lc


def _lower_angle(args, f: _Frame, lc: LoweredConstraint):
    """Angle(l1, l2, theta): the angle from l1 to l2 is theta, measured
    counter-clockwise or clockwise, whichever the initial geometry is closer
    to satisfying.  With d the signed error angle, the residual is
    tan(d/2) = sin(d) / (1 + cos(d)), built from cross and dot products: it
    vanishes only at d = 0 (not at the anti-parallel d = pi, as sin(d) would)
    and is monotone on (-pi, pi)."""
    l1, l2, theta = args
    theta = as_expr(theta)
    d1x, d1y = f.direction(l1)
    d2x, d2y = f.direction(l2)
    cr, dt = _cross(d1x, d1y, d2x, d2y), _dot(d1x, d1y, d2x, d2y)
    try:
        crv, dtv, th = evaluate(cr), evaluate(dt), evaluate(theta)
        n1 = math.hypot(evaluate(d1x), evaluate(d1y))
        n2 = math.hypot(evaluate(d2x), evaluate(d2y))
    except DomainError as exc:
        raise DeferredUnresolvable(f"Angle convention cannot be resolved: {exc}") from exc
    if n1 <= 1e-12 or n2 <= 1e-12:
        raise DeferredUnresolvable("Angle convention needs both lines to have non-zero length initially")
    phi = math.atan2(crv, dtv)
    ccw_gap = abs(_wrap(phi - th))
    cw_gap = abs(_wrap(phi + th))
    lc.deferred = True
    lc.choice = "ccw" if ccw_gap <= cw_gap else "cw"
    sign = -1.0 if lc.choice == "ccw" else 1.0
    scale = sqrt((square(d1x) + square(d1y)) * (square(d2x) + square(d2y)))
    sin_d = cr * cos(theta) + sign * (dt * sin(theta))
    cos_d = dt * cos(theta) - sign * (cr * sin(theta))
    lc.residuals.append(Residual(sin_d / (scale + cos_d), "angle"))


def angle_between(l1: Line, l2: Line, frame: Optional[Structure] = None) -> float:
    """Counter-clockwise angle from l1 to l2 at current values, in (-pi, pi]."""
    f = _Frame(frame or l1.owner)
    d1 = [evaluate(e) for e in f.direction(l1)]
    d2 = [evaluate(e) for e in f.direction(l2)]
    return math.atan2(d1[0] * d2[1] - d1[1] * d2[0], d1[0] * d2[0] + d1[1] * d2[1])


def _lower_structural(lowering: str, a: Structure, b: Structure, spec: ConstraintSpec,
                      co: list[Structure]) -> LoweredConstraint:
    A, B = _bbox_for(a, spec, co), _bbox_for(b, spec, co)
    owner = spec.owner
    lc = LoweredConstraint(spec, deferred=True)

    def geq(x, y):  # x >= y
        lc.extend(rewrite_inequality(y, x, owner))

    if lowering == "above":
        geq(A.bottom, B.top)
    elif lowering == "below":
        geq(B.bottom, A.top)
    elif lowering == "left_of":
        geq(B.left, A.right)
    elif lowering == "right_of":
        geq(A.left, B.right)
    elif lowering == "taller":
        geq(A.height, B.height)
    elif lowering == "wider":
        geq(A.width, B.width)
    elif lowering == "center_inside":
        lc.residuals += [Residual(A.center_x - B.center_x, "center_x"),
                         Residual(A.center_y - B.center_y, "center_y")]
        geq(A.left, B.left)
        geq(B.right, A.right)
        geq(A.bottom, B.bottom)
        geq(B.top, A.top)
    elif lowering == "h_centered":
        lc.residuals.append(Residual(A.center_x - B.center_x, "center_x"))
    elif lowering == "v_centered":
        lc.residuals.append(Residual(A.center_y - B.center_y, "center_y"))
    else:  # pragma: no cover
        raise LoweringError(f"no lowering named {lowering!r}")
    return lc


def lower(spec: ConstraintSpec) -> LoweredConstraint:
    """Residuals for one spec at the current parameter values (which act as
    the initialization for every deferred choice)."""
    sig = check_signature(spec)
    if sig is None:
        raise LoweringError(f"{spec.surface}: arguments do not match any signature", path=spec.owner.path)
    co = _cooccurring(spec)
    if sig.lowering == "equation":
        lhs = _resolve_expr(spec.args[0], spec, co)
        rhs = _resolve_expr(spec.args[2], spec, co)
        rel = spec.args[1]
        if rel == "==":
            lc = LoweredConstraint(spec, residuals=[Residual(lhs - rhs, "equation")])
        else:
            lc = rewrite_inequality(lhs, rhs, spec.owner, rel)
            lc.spec = spec
        lc.deferred = bool(co)
        return lc
    args = [(_resolve_expr(a, spec, co) if arg_kind(a) == "expr" else a) for a in spec.args]
    if sig.swap:
        args[0], args[1] = args[1], args[0]
    entry = REGISTRY[spec.name]
    if entry.kind == "structural":
        return _lower_structural(sig.lowering, args[0], args[1], spec, co)
    lc = _lower_geometric(sig.lowering, args, _Frame(spec.owner), spec)
    lc.deferred = lc.deferred or bool(co)
    return lc


def finalize_deferred(root: Structure) -> list[Diagnostic]:
    """Lower every constraint in the tree at the current values and attach
    each structure's non-inversion constraints.  Safe to call again: earlier
    lowerings and their slacks are discarded first."""
    diags: list[Diagnostic] = []
    for s in root.walk():
        s.lowered = []
        s.slacks = []
        s.adopted = []
    for s in root.walk():
        for spec in s.constraints:
            try:
                lc = lower(spec)
            except (AidlError, DomainError) as exc:
                if isinstance(exc, DomainError):
                    d = Diagnostic(Code.DOMAIN, f"{spec.surface}: {exc}", path=s.path)
                else:
                    d = exc.to_diagnostic()
                    d.path = d.path or s.path
                d.span = spec.span
                diags.append(d)
                continue
            s.lowered.append(lc)
            for r in lc.residuals:
                for p in parameters(r.expr):
                    if p.owner is None:
                        p.owner = s
                        s.adopted.append(p)
        box = bounding_box(s, frame=s)
        s.lowered += add_noninversion(box, s)
    return diags


def residuals_of(structure: Structure) -> list[Residual]:
    return [r for lc in structure.lowered for r in lc.residuals]


def max_residual(root: Structure) -> float:
    worst = 0.0
    for s in root.walk():
        for r in residuals_of(s):
            worst = max(worst, abs(r.value()))
    return worst


def all_inequalities(root: Structure) -> list[Inequality]:
    return [q for s in root.walk() for lc in s.lowered for q in lc.inequalities]


def strip_explicit(root: Structure) -> int:
    """Drop every constraint the program stated, keeping those a constructor
    implies, and re-lower.  Returns the number removed."""
    removed = 0
    for s in root.walk():
        keep = [c for c in s.constraints if c.implicit]
        removed += len(s.constraints) - len(keep)
        s.constraints = keep
    finalize_deferred(root)
    return removed


def explicit_residuals(root: Structure, names=None) -> dict:
    """Current |residual| maximum for each stated constraint, keyed by
    ``path:index:name``; ``names`` filters on canonical constraint names."""
    out = {}
    for s in root.walk():
        for i, lc in enumerate(s.lowered):
            if lc.spec is None or lc.spec.implicit:
                continue
            if names is not None and lc.spec.name not in names:
                continue
            out[f"{s.path}:{i}:{lc.spec.name}"] = max((abs(r.value()) for r in lc.residuals), default=0.0)
    return out
