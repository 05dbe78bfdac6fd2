"""The structure tree: frames, sketches, geometry and references.

Every structure owns a translation frame (``tx``, ``ty``) relative to its
parent and a sketch of geometry whose point coordinates are expressed in that
frame.  Constraints attached to a structure may reference anything in its
subtree; coordinates of deeper entities are lifted into the constraint
owner's frame by adding the translations along the chain.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Union

from .diagnostics import AidlError, Code, Diagnostic
from .expr import (
    Expr,
    Parameter,
    ParamRef,
    as_expr,
    evaluate,
    max_of,
    min_of,
    square,
    sqrt,
)

STRUCTURE_TYPES = ("Assembly", "Solid", "Hole", "Drawing")
ORIENTATIONS = ("Top", "Front", "Side")
RESERVED = frozenset({"bb", "bbox", "tx", "ty"})
BBOX_SIDES = ("left", "right", "top", "bottom", "width", "height", "center_x", "center_y")
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class DuplicateName(AidlError):
    code = Code.DUPLICATE_NAME


class IllegalReference(AidlError):
    code = Code.ILLEGAL_REFERENCE


class NameResolution(AidlError):
    code = Code.NAME_RESOLUTION


class ConstructorError(AidlError):
    code = Code.CONSTRUCTOR


# --- geometry -------------------------------------------------------------------

class Geometry:
    kind = "geometry"

    def __init__(self, name: str = ""):
        self.name = name
        self.owner: Optional[Structure] = None

    def defining_points(self) -> list["Point"]:
        return []

    def attribute(self, attr: str, frame: Optional["Structure"] = None):
        raise NameResolution(f"{self.kind} {self.name!r} has no attribute {attr!r}")

    def __repr__(self) -> str:
        where = self.owner.path if self.owner else "<detached>"
        return f"<{type(self).__name__} {where}:{self.name}>"


class Point(Geometry):
    kind = "point"

    def __init__(self, x: float = 0.0, y: float = 0.0, name: str = ""):
        super().__init__(name)
        self.x = Parameter(f"{name}.x", x)
        self.y = Parameter(f"{name}.y", y)
        self.x.home = (self, "x")
        self.y.home = (self, "y")

    def defining_points(self):
        return [self]

    def xy(self) -> tuple[float, float]:
        return (self.x.value, self.y.value)

    def attribute(self, attr, frame=None):
        if attr in ("x", "y"):
            return _label(coord(self, attr, frame), self, attr)
        return super().attribute(attr, frame)


class Line(Geometry):
    kind = "line"

    def __init__(self, start: Point, end: Point, name: str = ""):
        super().__init__(name)
        self.start = start
        self.end = end

    def defining_points(self):
        return [self.start, self.end]

    def length(self) -> Expr:
        s, e = self.start, self.end
        return _label(sqrt(square(e.x.ref() - s.x.ref()) + square(e.y.ref() - s.y.ref())), self, "length")

    def attribute(self, attr, frame=None):
        if attr == "start":
            return self.start
        if attr == "end":
            return self.end
        if attr == "length":
            return self.length()
        return super().attribute(attr, frame)


class Arc(Geometry):
    """Circular arc swept counter-clockwise from ``start`` to ``end``."""

    kind = "arc"

    def __init__(self, center: Point, start: Point, end: Point, name: str = ""):
        super().__init__(name)
        self.center = center
        self.start = start
        self.end = end

    def defining_points(self):
        return [self.center, self.start, self.end]

    def radius_squared(self) -> Expr:
        c, s = self.center, self.start
        return square(s.x.ref() - c.x.ref()) + square(s.y.ref() - c.y.ref())

    def radius(self) -> Expr:
        return _label(sqrt(self.radius_squared()), self, "radius")

    def diameter(self) -> Expr:
        return _label(2.0 * sqrt(self.radius_squared()), self, "diameter")

    def attribute(self, attr, frame=None):
        if attr in ("center", "start", "end"):
            return getattr(self, attr)
        if attr == "radius":
            return self.radius()
        if attr == "diameter":
            return self.diameter()
        return super().attribute(attr, frame)


class Circle(Geometry):
    kind = "circle"

    def __init__(self, center: Point, radius: float = 1.0, name: str = ""):
        super().__init__(name)
        self.center = center
        self.radius = Parameter(f"{name}.radius", radius)
        self.radius.home = (self, "radius")

    def defining_points(self):
        return [self.center]

    def diameter(self) -> Expr:
        return _label(2.0 * self.radius.ref(), self, "diameter")

    def attribute(self, attr, frame=None):
        if attr == "center":
            return self.center
        if attr == "radius":
            return _label(self.radius.ref(), self, "radius")
        if attr == "diameter":
            return self.diameter()
        return super().attribute(attr, frame)


class Compound(Geometry):
    """A named group of primitives (Rectangle, Triangle) that share corner
    points.  After flattening, its members live in the owner's sketch and
    remain reachable through the compound's sub-names."""

    kind = "compound"

    def __init__(self, ctor: str, members: dict, name: str = "", rotatable: bool = False):
        super().__init__(name)
        self.ctor = ctor
        self.members = dict(members)
        self.rotatable = rotatable
        self.flattened = False

    def defining_points(self):
        return [m for m in self.members.values() if isinstance(m, Point)]

    def primitives(self) -> list[Geometry]:
        return [m for m in self.members.values() if not isinstance(m, Point)]

    def attribute(self, attr, frame=None):
        if attr in self.members:
            return self.members[attr]
        if self.ctor == "Rectangle" and attr in ("width", "height"):
            line = self.members["bottom"] if attr == "width" else self.members["left"]
            return _label(line.length(), self, attr)
        return super().attribute(attr, frame)


# Rectangle corners / edges, counter-clockwise.
RECT_CORNERS = ("bottom_left", "bottom_right", "top_right", "top_left")
RECT_EDGES = (("bottom", "bottom_left", "bottom_right"), ("right", "bottom_right", "top_right"),
              ("top", "top_right", "top_left"), ("left", "top_left", "bottom_left"))
TRI_CORNERS = ("pt_a", "pt_b", "pt_c")
TRI_EDGES = (("side_ab", "pt_a", "pt_b"), ("side_bc", "pt_b", "pt_c"), ("side_ca", "pt_c", "pt_a"))


def _label(e: Expr, entity, attr) -> Expr:
    e.origin = (entity, attr)
    return e


PointLike = Union[Point, tuple, list]


# --- structures -------------------------------------------------------------------

class Structure:
    def __init__(self, name: str = "root", type: str = "Assembly", orientation: str = "Top",
                 tx: float = 0.0, ty: float = 0.0):
        if type not in STRUCTURE_TYPES:
            raise ConstructorError(f"unknown structure type {type!r}; expected one of {STRUCTURE_TYPES}")
        if orientation not in ORIENTATIONS:
            raise ConstructorError(f"unknown orientation {orientation!r}; expected one of {ORIENTATIONS}")
        _check_name(name)
        self.name = name
        self.type = type
        self.orientation = orientation
        self.parent: Optional[Structure] = None
        self.children: list[Structure] = []
        self.namespace: dict[str, object] = {}
        self.decls: list = []            # named declarations in order
        self.points: list[Point] = []
        self.primitives: list[Geometry] = []
        self.parameters: list[Parameter] = []
        self.constraints: list = []      # ConstraintSpec
        self.lowered: list = []          # LoweredConstraint, filled by finalize
        self.slacks: list[Parameter] = []
        self.adopted: list[Parameter] = []   # free-standing parameters pulled in by constraints
        self.virtual_bbox: Optional[dict[str, Parameter]] = None
        self.tx = Parameter(f"{name}.tx", tx, role="frame")
        self.ty = Parameter(f"{name}.ty", ty, role="frame")
        for p, a in ((self.tx, "tx"), (self.ty, "ty")):
            p.owner = self
            p.home = (self, a)
        self.span = None

    # -- tree ------------------------------------------------------------------
    @property
    def path(self) -> str:
        parts = []
        s = self
        while s is not None:
            parts.append(s.name)
            s = s.parent
        return ".".join(reversed(parts))

    @property
    def root(self) -> "Structure":
        s = self
        while s.parent is not None:
            s = s.parent
        return s

    @property
    def depth(self) -> int:
        d, s = 0, self
        while s.parent is not None:
            d, s = d + 1, s.parent
        return d

    def is_descendant_of(self, other: "Structure") -> bool:
        """True when ``other`` is this structure or one of its ancestors."""
        s = self
        while s is not None:
            if s is other:
                return True
            s = s.parent
        return False

    def walk(self) -> Iterator["Structure"]:
        """Pre-order traversal in declaration order."""
        yield self
        for c in self.children:
            yield from c.walk()

    def post_order(self) -> Iterator["Structure"]:
        for c in self.children:
            yield from c.post_order()
        yield self

    def is_empty(self) -> bool:
        return not self.points and not self.primitives

    # -- registration ------------------------------------------------------------
    def _register(self, name: str, entity, decl=True):
        _check_name(name)
        if name in self.namespace:
            raise DuplicateName(f"{name!r} is already defined in {self.path}", path=self.path)
        self.namespace[name] = entity
        if decl:
            self.decls.append(entity)

    def _adopt_point(self, p: Point, local: str):
        p.owner = self
        p.name = local
        for prm, a in ((p.x, "x"), (p.y, "y")):
            prm.owner = self
            prm.name = f"{self.path}.{local}.{a}"
        self.points.append(p)

    def _point_arg(self, value: PointLike, local: str) -> Point:
        if isinstance(value, Point):
            if value.owner is None:
                self._adopt_point(value, local)
            elif value.owner is not self:
                raise IllegalReference(
                    f"geometry in {self.path} cannot reference point {value.owner.path}.{value.name} "
                    "owned by another structure", path=self.path)
            return value
        if isinstance(value, (tuple, list)) and len(value) == 2:
            p = Point(float(value[0]), float(value[1]))
            self._adopt_point(p, local)
            return p
        raise ConstructorError(f"expected a point or (x, y) pair for {local!r}, got {value!r}",
                               path=self.path)

    def add_structure(self, name_or_child: Union[str, "Structure"], type: str = "Solid",
                      orientation: str = "Top", tx: float = 0.0, ty: float = 0.0) -> "Structure":
        if isinstance(name_or_child, Structure):
            child = name_or_child
            if child.parent is not None or self.is_descendant_of(child):
                raise IllegalReference(f"structure {child.name!r} is already attached", path=self.path)
        else:
            child = Structure(name_or_child, type, orientation, tx, ty)
        self._register(child.name, child)
        child.parent = self
        self.children.append(child)
        _rename_subtree(child)
        return child

    def add_point(self, name: str, x: float = 0.0, y: float = 0.0) -> Point:
        self._register(name, None)
        p = Point(x, y)
        self._adopt_point(p, name)
        self.namespace[name] = p
        self.decls[-1] = p
        return p

    def _add_primitive(self, name, prim):
        self._register(name, prim)
        prim.owner = self
        prim.name = name
        self.primitives.append(prim)
        return prim

    def add_line(self, name: str, start: PointLike, end: PointLike) -> Line:
        self._check_free(name)
        s = self._point_arg(start, f"{name}.start")
        e = self._point_arg(end, f"{name}.end")
        return self._add_primitive(name, Line(s, e))

    def add_arc(self, name: str, center: PointLike, start: PointLike, end: PointLike) -> Arc:
        self._check_free(name)
        c = self._point_arg(center, f"{name}.center")
        s = self._point_arg(start, f"{name}.start")
        e = self._point_arg(end, f"{name}.end")
        arc = self._add_primitive(name, Arc(c, s, e))
        self._implicit("Equal", _sqdist(s, c), _sqdist(e, c))
        return arc

    def add_circle(self, name: str, center: PointLike, radius: float) -> Circle:
        self._check_free(name)
        if not radius > 0:
            raise ConstructorError(f"circle {name!r} needs a positive radius, got {radius!r}", path=self.path)
        c = self._point_arg(center, f"{name}.center")
        circ = Circle(c, radius)
        circ.radius.owner = self
        circ.radius.name = f"{self.path}.{name}.radius"
        return self._add_primitive(name, circ)

    def add_parameter(self, name: str, value: float, mutable: bool = True) -> Parameter:
        self._register(name, None)
        p = Parameter(f"{self.path}.{name}", value, mutable)
        p.owner = self
        p.home = (self, name)
        self.namespace[name] = p
        self.decls[-1] = p
        self.parameters.append(p)
        return p

    def add_rectangle(self, name: str, *, center: Optional[PointLike] = None,
                      origin: Optional[PointLike] = None, width: Optional[float] = None,
                      height: Optional[float] = None, corners: Optional[dict] = None,
                      rotatable: bool = False) -> Compound:
        """Rectangle from a center or bottom-left origin plus size, or from
        four explicit corners.  Axis-aligned unless ``rotatable``."""
        self._check_free(name)
        if corners is None:
            if (center is None) == (origin is None) or width is None or height is None:
                raise ConstructorError(
                    f"Rectangle {name!r} needs center= or origin= together with width= and height=",
                    path=self.path)
            if isinstance(center, Point) or isinstance(origin, Point):
                raise ConstructorError("Rectangle center/origin must be coordinates", path=self.path)
            if center is not None:
                x0, y0 = float(center[0]) - width / 2.0, float(center[1]) - height / 2.0
            else:
                x0, y0 = float(origin[0]), float(origin[1])
            x1, y1 = x0 + width, y0 + height
            corners = {"bottom_left": (x0, y0), "bottom_right": (x1, y0),
                       "top_right": (x1, y1), "top_left": (x0, y1)}
        elif set(corners) != set(RECT_CORNERS):
            raise ConstructorError(f"Rectangle corners must be exactly {RECT_CORNERS}", path=self.path)
        members = {k: self._point_arg(corners[k], f"{name}.{k}") for k in RECT_CORNERS}
        comp = Compound("Rectangle", members, rotatable=rotatable)
        for edge, a, b in RECT_EDGES:
            comp.members[edge] = Line(members[a], members[b])
        self._add_compound(name, comp)
        m = comp.members
        if rotatable:
            self._implicit("Perpendicular", m["bottom"], m["right"])
            self._implicit("Perpendicular", m["right"], m["top"])
            self._implicit("Perpendicular", m["top"], m["left"])
        else:
            self._implicit("Horizontal", m["bottom"])
            self._implicit("Horizontal", m["top"])
            self._implicit("Vertical", m["left"])
            self._implicit("Vertical", m["right"])
        return comp

    def add_triangle(self, name: str, *, pt_a: Optional[PointLike] = None, pt_b: Optional[PointLike] = None,
                     pt_c: Optional[PointLike] = None, center: Optional[PointLike] = None,
                     base: Optional[float] = None, height: Optional[float] = None) -> Compound:
        """Triangle from three corners, or an isosceles one from the center of
        its bounding box, base width and height."""
        self._check_free(name)
        if center is not None:
            if base is None or height is None or any(p is not None for p in (pt_a, pt_b, pt_c)):
                raise ConstructorError(f"Triangle {name!r}: center= needs base= and height=", path=self.path)
            cx, cy = float(center[0]), float(center[1])
            pt_a = (cx - base / 2.0, cy - height / 2.0)
            pt_b = (cx + base / 2.0, cy - height / 2.0)
            pt_c = (cx, cy + height / 2.0)
        elif any(p is None for p in (pt_a, pt_b, pt_c)):
            raise ConstructorError(f"Triangle {name!r} needs pt_a, pt_b and pt_c", path=self.path)
        given = {"pt_a": pt_a, "pt_b": pt_b, "pt_c": pt_c}
        members = {k: self._point_arg(given[k], f"{name}.{k}") for k in TRI_CORNERS}
        comp = Compound("Triangle", members)
        for edge, a, b in TRI_EDGES:
            comp.members[edge] = Line(members[a], members[b])
        self._add_compound(name, comp)
        return comp

    def _add_compound(self, name, comp):
        self._register(name, comp)
        comp.owner = self
        comp.name = name
        flatten_compounds(self)

    def _check_free(self, name):
        _check_name(name)
        if name in self.namespace:
            raise DuplicateName(f"{name!r} is already defined in {self.path}", path=self.path)

    # -- constraints ---------------------------------------------------------------
    def add_constraint(self, name: str, *args, span=None, implicit=False):
        from .constraints import ConstraintSpec, resolve_synonym

        canonical = resolve_synonym(name)
        spec = ConstraintSpec(canonical, name, list(args), self, span=span, implicit=implicit)
        self.constraints.append(spec)
        return spec

    def add_equation(self, lhs, relation: str, rhs, span=None):
        from .constraints import ConstraintSpec

        if relation not in ("==", "<=", ">="):
            raise ConstructorError(f"unknown relation {relation!r}")
        spec = ConstraintSpec("Equation", relation, [as_expr(lhs), relation, as_expr(rhs)], self, span=span)
        self.constraints.append(spec)
        return spec

    def _implicit(self, name, *args):
        return self.add_constraint(name, *args, implicit=True)

    # -- lookup -------------------------------------------------------------------------
    def attribute(self, attr: str, frame: Optional["Structure"] = None):
        if attr in self.namespace:
            v = self.namespace[attr]
            if isinstance(v, Parameter):
                return _label(v.ref(), self, attr)
            return v
        if attr in ("bb", "bbox"):
            return BBoxProxy(self)
        if attr in ("tx", "ty"):
            return _label(getattr(self, attr).ref(), self, attr)
        raise NameResolution(f"{self.path} has no member {attr!r}", path=self.path)

    def __repr__(self) -> str:
        return f"<Structure {self.path} : {self.type}>"


def _check_name(name: str):
    if not isinstance(name, str) or not _NAME_RE.match(name):
        raise ConstructorError(f"invalid name {name!r}")
    if name in RESERVED:
        raise ConstructorError(f"{name!r} is reserved")


def _sqdist(a: Point, b: Point) -> Expr:
    return square(a.x.ref() - b.x.ref()) + square(a.y.ref() - b.y.ref())


def _rename_subtree(s: Structure):
    for st in s.walk():
        base = st.path
        st.tx.name, st.ty.name = f"{base}.tx", f"{base}.ty"
        for p in st.points:
            p.x.name, p.y.name = f"{base}.{p.name}.x", f"{base}.{p.name}.y"
        for prim in st.primitives:
            if isinstance(prim, Circle):
                prim.radius.name = f"{base}.{prim.name}.radius"
        for prm in st.parameters:
            prm.name = f"{base}.{prm.home[1]}"


def flatten_compounds(structure: Structure) -> None:
    """Register every compound's member primitives directly on the owner's
    sketch.  Members keep their compound-qualified names (``rect.top``) and
    corner points stay shared, which is what keeps adjacent edges attached."""
    for decl in structure.decls:
        if isinstance(decl, Compound) and not decl.flattened:
            for key, m in decl.members.items():
                if isinstance(m, Point):
                    continue
                m.owner = structure
                m.name = f"{decl.name}.{key}"
                structure.primitives.append(m)
            decl.flattened = True


# --- paths and frames ------------------------------------------------------------------

def entity_structure(entity) -> Optional[Structure]:
    if isinstance(entity, Structure):
        return entity
    if isinstance(entity, Parameter):
        return entity.owner
    return getattr(entity, "owner", None)


def translation_chain(structure: Structure, frame: Structure) -> list[Structure]:
    """Structures whose translations lift ``structure``'s local coordinates
    into ``frame``; ``frame`` must be an ancestor (or the structure itself)."""
    chain, s = [], structure
    while s is not frame:
        if s is None or s.parent is None:
            if frame is None and s is not None:
                return chain  # world frame: stop below the root
            raise IllegalReference(f"{structure.path} is not inside {frame.path}")
        chain.append(s)
        s = s.parent
    return chain


def coord(point: Point, axis: str, frame: Optional[Structure] = None) -> Expr:
    """``point``'s x or y coordinate as an expression in ``frame``
    (default: the point's own structure)."""
    e = ParamRef(point.x if axis == "x" else point.y)
    if frame is None or point.owner is None or frame is point.owner:
        return e
    for s in translation_chain(point.owner, frame):
        e = e + ParamRef(s.tx if axis == "x" else s.ty)
    return e


def world_xy(point: Point) -> tuple[float, float]:
    """Numeric world coordinates (relative to the root's frame)."""
    x, y = point.x.value, point.y.value
    s = point.owner
    while s is not None and s.parent is not None:
        x += s.tx.value
        y += s.ty.value
        s = s.parent
    return (x, y)


def world_offset(structure: Structure) -> tuple[float, float]:
    x = y = 0.0
    s = structure
    while s is not None and s.parent is not None:
        x += s.tx.value
        y += s.ty.value
        s = s.parent
    return (x, y)


def local_name(entity) -> str:
    if isinstance(entity, Structure):
        return entity.name
    if isinstance(entity, Parameter):
        ent, attr = entity.home
        if isinstance(ent, Structure):
            return attr
        return f"{local_name(ent)}.{attr}"
    return entity.name


def path_of(entity, relative_to: Optional[Structure] = None) -> str:
    """Dotted path of ``entity`` as seen from ``relative_to`` (absolute when None)."""
    if isinstance(entity, Parameter) and entity.home is not None and isinstance(entity.home[0], Structure):
        s, attr = entity.home
        base = path_of(s, relative_to)
        return f"{base}.{attr}" if base else attr
    if isinstance(entity, Parameter) and entity.home is not None:
        ent, attr = entity.home
        return f"{path_of(ent, relative_to)}.{attr}"
    s = entity if isinstance(entity, Structure) else entity_structure(entity)
    names = []
    while s is not None and s is not relative_to:
        names.append(s.name)
        s = s.parent
    if relative_to is not None and s is None:
        raise IllegalReference(f"{entity!r} is not inside {relative_to.path}")
    names.reverse()
    if not isinstance(entity, Structure):
        names.append(entity.name)
    return ".".join(names)


# --- bounding boxes -------------------------------------------------------------------------

class BBoxRef(Expr):
    """Deferred reference to one side of a structure's bounding box.  It has
    no value until lowering substitutes a concrete expression."""

    __slots__ = ("structure", "side")

    def __init__(self, structure: Structure, side: str):
        super().__init__()
        if side not in BBOX_SIDES:
            raise NameResolution(f"bounding boxes have no side {side!r}")
        self.structure = structure
        self.side = side
        self.origin = (structure, f"bb.{side}")

    def describe(self):
        return f'"{self.structure.path}" {self.side}'


class BBoxProxy:
    def __init__(self, structure: Structure):
        self.structure = structure

    def attribute(self, attr, frame=None):
        return BBoxRef(self.structure, attr)


@dataclass
class BBox:
    left: Expr
    right: Expr
    top: Expr
    bottom: Expr
    virtual: bool = False
    structure: Optional[Structure] = None

    @property
    def width(self) -> Expr:
        return self.right - self.left

    @property
    def height(self) -> Expr:
        return self.top - self.bottom

    @property
    def center_x(self) -> Expr:
        return 0.5 * (self.left + self.right)

    @property
    def center_y(self) -> Expr:
        return 0.5 * (self.bottom + self.top)

    def side(self, name: str) -> Expr:
        return getattr(self, name)

    def values(self) -> dict:
        return {k: evaluate(getattr(self, k)) for k in ("left", "right", "top", "bottom")}


def _on_curve_points(structure: Structure) -> list[Point]:
    """Points that lie on the structure's drawn geometry (centers excluded)."""
    out, seen = [], set()

    def add(p):
        if id(p) not in seen:
            seen.add(id(p))
            out.append(p)

    for decl in structure.decls:
        if isinstance(decl, Point):
            add(decl)
    for prim in structure.primitives:
        if isinstance(prim, Line):
            add(prim.start)
            add(prim.end)
        elif isinstance(prim, Arc):
            add(prim.start)
            add(prim.end)
    return out


def bbox_members(structure: Structure, frame: Structure) -> list[tuple[Expr, Expr]]:
    """Coordinate pairs (in ``frame``) of the structure's own sketch that
    bound it: on-curve points, circle extremes, and the axis extremes of arcs
    that fall inside the sweep at the current parameter values."""
    pts = [(coord(p, "x", frame), coord(p, "y", frame)) for p in _on_curve_points(structure)]
    for prim in structure.primitives:
        if isinstance(prim, Circle):
            cx, cy, r = coord(prim.center, "x", frame), coord(prim.center, "y", frame), prim.radius.ref()
            pts += [(cx - r, cy), (cx + r, cy), (cx, cy - r), (cx, cy + r)]
        elif isinstance(prim, Arc):
            cx, cy = coord(prim.center, "x", frame), coord(prim.center, "y", frame)
            r = sqrt(prim.radius_squared())
            for ang, (dx, dy) in ((0.0, (1, 0)), (0.5 * math.pi, (0, 1)), (math.pi, (-1, 0)), (1.5 * math.pi, (0, -1))):
                if arc_contains_angle(prim, ang):
                    pts.append((cx + dx * r if dx else cx, cy + dy * r if dy else cy))
    return pts


def arc_angles(arc: Arc) -> tuple[float, float]:
    """Start angle and ccw sweep in (0, 2*pi] at current values."""
    cx, cy = arc.center.xy()
    sx, sy = arc.start.xy()
    ex, ey = arc.end.xy()
    a0 = math.atan2(sy - cy, sx - cx)
    a1 = math.atan2(ey - cy, ex - cx)
    sweep = (a1 - a0) % (2 * math.pi)
    if sweep <= 1e-12:
        sweep = 2 * math.pi
    return a0, sweep


def arc_contains_angle(arc: Arc, ang: float) -> bool:
    a0, sweep = arc_angles(arc)
    rel = (ang - a0) % (2 * math.pi)
    return 0.0 < rel < sweep


def virtual_bbox(structure: Structure) -> dict[str, Parameter]:
    if structure.virtual_bbox is None:
        vb = {}
        for side in ("left", "right", "top", "bottom"):
            p = Parameter(f"{structure.path}.bb.{side}", 0.0, role="bbox")
            p.owner = structure
            p.home = (structure, f"bb.{side}")
            vb[side] = p
        structure.virtual_bbox = vb
    return structure.virtual_bbox


def bounding_box(structure: Structure, exclusion: Iterable[Structure] = (),
                 frame: Optional[Structure] = None) -> BBox:
    """Deferred min/max bounding box of ``structure``'s sketch plus its
    non-excluded descendants, expressed in ``frame`` (default: the parent's
    frame).  Excluding a descendant drops its whole subtree.  A structure with
    nothing to measure gets a virtual box of four free parameters."""
    if frame is None:
        frame = structure.parent or structure
    excluded = {id(s) for s in exclusion if s is not structure}
    pts: list[tuple[Expr, Expr]] = []

    def visit(s):
        if id(s) in excluded:
            return
        pts.extend(bbox_members(s, frame))
        for c in s.children:
            visit(c)

    visit(structure)
    if not pts:
        vb = virtual_bbox(structure)
        chain = translation_chain(structure, frame)

        def lift(p, axis):
            e = p.ref()
            for s in chain:
                e = e + (s.tx if axis == "x" else s.ty).ref()
            return e

        return BBox(lift(vb["left"], "x"), lift(vb["right"], "x"), lift(vb["top"], "y"),
                    lift(vb["bottom"], "y"), virtual=True, structure=structure)
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    return BBox(min_of(xs), max_of(xs), max_of(ys), min_of(ys), structure=structure)


# --- reachability & validation ------------------------------------------------------------

def solver_parameters(root: Structure) -> list[Parameter]:
    """Every parameter of the compiled model: frames (below the root),
    sketch geometry and parameters, slacks and virtual boxes, plus any
    free-standing parameter a constraint residual pulls in."""
    from .expr import parameters as expr_params

    out, seen = [], set()

    def add(p):
        if p.id not in seen:
            seen.add(p.id)
            out.append(p)

    for s in root.walk():
        if s.parent is not None:
            add(s.tx)
            add(s.ty)
        for p in s.points:
            add(p.x)
            add(p.y)
        for prim in s.primitives:
            if isinstance(prim, Circle):
                add(prim.radius)
        for p in s.parameters:
            add(p)
        for p in s.slacks + s.adopted:
            add(p)
        if s.virtual_bbox:
            for p in s.virtual_bbox.values():
                add(p)
        for lc in s.lowered:
            for r in lc.residuals:
                for p in expr_params(r.expr):
                    add(p)
    return out


def owned_parameters(s: Structure) -> list[Parameter]:
    """Parameters a structure's local solve may move (its frame excluded)."""
    out = []
    for p in s.points:
        out += [p.x, p.y]
    for prim in s.primitives:
        if isinstance(prim, Circle):
            out.append(prim.radius)
    out += s.parameters
    out += s.slacks
    out += s.adopted
    if s.virtual_bbox:
        out += list(s.virtual_bbox.values())
    return out


def is_attached(entity, root: Structure) -> bool:
    s = entity_structure(entity)
    if s is None:
        return isinstance(entity, Parameter)  # free-standing parameters get adopted
    if s.root is not root:
        return False
    if isinstance(entity, Structure):
        return True
    if isinstance(entity, Point):
        return any(p is entity for p in s.points)
    if isinstance(entity, Compound):
        return any(d is entity for d in s.decls)
    if isinstance(entity, Geometry):
        return any(p is entity for p in s.primitives)
    return True


def validate(root: Structure) -> list[Diagnostic]:
    """Check the model's reference rules; failures are returned, not raised.

    Rules, checked in this order (one diagnostic per offending constraint):
    dangling targets, geometry crossing structures, constraint references
    leaving the owner's subtree, structural self-reference, and signature
    (arity/type) mismatches.
    """
    from .constraints import referenced_entities, check_signature, REGISTRY

    diags: list[Diagnostic] = []
    for s in root.walk():
        for prim in s.primitives:
            for p in prim.defining_points():
                if p.owner is None or p.owner.root is not root or not any(q is p for q in p.owner.points):
                    diags.append(Diagnostic(Code.DANGLING_REFERENCE,
                                            f"{prim.kind} {prim.name!r} references a point that is not in the model",
                                            path=s.path))
                    break
                if p.owner is not s:
                    diags.append(Diagnostic(Code.ILLEGAL_REFERENCE,
                                            f"{prim.kind} {prim.name!r} references point {p.owner.path}.{p.name} "
                                            "from another structure", path=s.path))
                    break
        for spec in s.constraints:
            d = _check_spec(spec, s, root, referenced_entities, check_signature, REGISTRY)
            if d is not None:
                d.span = spec.span
                diags.append(d)
    return diags


def _check_spec(spec, s, root, referenced_entities, check_signature, registry):
    refs = referenced_entities(spec)
    for ent in refs:
        if not is_attached(ent, root):
            return Diagnostic(Code.DANGLING_REFERENCE,
                              f"{spec.surface} references {_describe(ent)} which is not part of the model",
                              path=s.path)
    for ent in refs:
        es = entity_structure(ent)
        if es is not None and not es.is_descendant_of(s):
            return Diagnostic(Code.SUBTREE_VIOLATION,
                              f"{spec.surface} in {s.path} references {_describe(ent)} outside its subtree",
                              path=s.path)
    entry = registry.get(spec.name)
    if entry is not None and entry.kind == "structural":
        for a in spec.args:
            if a is s:
                return Diagnostic(Code.SELF_REFERENCE,
                                  f"structural constraint {spec.surface} in {s.path} references its own structure",
                                  path=s.path)
    if check_signature(spec) is None:
        return Diagnostic(Code.ARITY_OR_TYPE, _signature_message(spec, registry), path=s.path)
    return None


def _describe(ent) -> str:
    if isinstance(ent, Structure):
        return f"structure {ent.path}"
    if isinstance(ent, Parameter):
        return f"parameter {ent.name}"
    owner = ent.owner.path if ent.owner else "<detached>"
    return f"{ent.kind} {owner}.{ent.name}"


def _signature_message(spec, registry) -> str:
    from .constraints import arg_kind

    got = ", ".join(arg_kind(a) for a in spec.args)
    entry = registry.get(spec.name)
    if entry is None:
        return f"{spec.surface} is not a registered constraint"
    wanted = " | ".join("(" + ", ".join(sig.args) + ")" for sig in entry.signatures)
    return f"{spec.surface} expects {wanted}; got ({got})"
